"""From raw observations to model inputs: NDVI, monthly composites, masks, climate."""

from __future__ import annotations

import csv
import datetime as dt
import math
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .raster import (
    CATEGORICAL_NODATA,
    AlignmentError,
    BandKind,
    GridMeta,
    MonthlyStack,
    RasterGrid,
    mosaic_stacks,
    read_raster,
    read_stack,
)

WATER, NON_CROPLAND, CROPLAND = 0, 1, 2


@dataclass(frozen=True)
class Observation:
    date: dt.date
    nir: float
    red: float
    valid: bool = True

    def __post_init__(self):
        if self.valid and not (0 <= self.nir <= 1 and 0 <= self.red <= 1):
            raise ValueError(f"reflectances must lie in [0, 1]: nir={self.nir}, red={self.red}")


def compute_ndvi(nir, red):
    """(nir - red) / (nir + red); NaN where both bands are zero.

    Works elementwise on arrays; scalars in give a float out.
    """
    nir_a = np.asarray(nir, dtype=float)
    red_a = np.asarray(red, dtype=float)
    if (nir_a < 0).any() or (red_a < 0).any():
        raise ValueError("reflectances must be non-negative")
    total = nir_a + red_a
    with np.errstate(invalid="ignore", divide="ignore"):
        ndvi = np.where(total > 0, (nir_a - red_a) / np.where(total > 0, total, 1.0), np.nan)
    if ndvi.ndim == 0:
        return float(ndvi)
    return ndvi


def fill_circular(values: Sequence[float]) -> np.ndarray:
    """Linearly interpolate NaN months from the nearest valid months, wrapping Dec->Jan.

    All-NaN input stays all-NaN; a single valid month fills the whole year.
    """
    v = np.array(values, dtype=float)
    n = len(v)
    valid = np.flatnonzero(~np.isnan(v))
    if valid.size == 0 or valid.size == n:
        return v
    out = v.copy()
    for m in np.flatnonzero(np.isnan(v)):
        back = next(d for d in range(1, n + 1) if not np.isnan(v[(m - d) % n]))
        fwd = next(d for d in range(1, n + 1) if not np.isnan(v[(m + d) % n]))
        lo, hi = v[(m - back) % n], v[(m + fwd) % n]
        out[m] = lo + (hi - lo) * back / (back + fwd)
    return out


def composite_monthly(observations: Iterable[Observation]) -> np.ndarray:
    """Twelve monthly mean NDVI values for one pixel.

    Only valid observations with a defined NDVI contribute. Sums use ``math.fsum``
    so the result does not depend on observation order.
    """
    by_month: dict[int, list[float]] = defaultdict(list)
    years = set()
    for obs in observations:
        years.add(obs.date.year)
        if not obs.valid:
            continue
        value = compute_ndvi(obs.nir, obs.red)
        if not math.isnan(value):
            by_month[obs.date.month].append(value)
    if len(years) > 1:
        raise ValueError(f"observations span several years: {sorted(years)}")
    months = np.full(12, np.nan)
    for month, vals in by_month.items():
        months[month - 1] = math.fsum(vals) / len(vals)
    return fill_circular(months)


def composite_csv(path, meta: GridMeta) -> MonthlyStack:
    """Build an NDVI stack from a ``pixel_row,pixel_col,date,nir,red,valid`` CSV.

    Pixels without any row in the file are nodata.
    """
    per_pixel: dict[tuple[int, int], list[Observation]] = defaultdict(list)
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"pixel_row", "pixel_col", "date", "nir", "red", "valid"} - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        for line, rec in enumerate(reader, start=2):
            r, c = int(rec["pixel_row"]), int(rec["pixel_col"])
            if not (0 <= r < meta.height and 0 <= c < meta.width):
                raise ValueError(f"{path}:{line}: pixel ({r}, {c}) outside {meta.height}x{meta.width} grid")
            per_pixel[(r, c)].append(Observation(
                dt.date.fromisoformat(rec["date"].strip()),
                float(rec["nir"]), float(rec["red"]),
                _parse_bool(rec["valid"])))
    out = np.full((12, *meta.shape), np.nan, dtype=np.float32)
    for (r, c) in sorted(per_pixel):
        out[:, r, c] = composite_monthly(per_pixel[(r, c)])
    return MonthlyStack.from_array(meta, BandKind.NDVI, out)


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "t", "yes", "y"):
        return True
    if t in ("0", "false", "f", "no", "n", ""):
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclass(frozen=True)
class CroplandMask:
    """MASK-band grid with codes 0 water, 1 non-cropland, 2 cropland, 255 nodata."""

    grid: RasterGrid

    def __post_init__(self):
        if self.grid.band_kind is not BandKind.MASK:
            raise ValueError(f"mask grid must be MASK band, got {self.grid.band_kind.name}")
        bad = ~np.isin(self.grid.values, [WATER, NON_CROPLAND, CROPLAND, CATEGORICAL_NODATA])
        if bad.any():
            raise ValueError(f"mask codes outside {{0,1,2,255}}: {np.unique(self.grid.values[bad])}")

    @property
    def meta(self) -> GridMeta:
        return self.grid.meta

    @property
    def cropland(self) -> np.ndarray:
        return self.grid.values == CROPLAND

    def window(self, row0, col0, height, width) -> CroplandMask:
        return CroplandMask(self.grid.window(row0, col0, height, width))


def remap_mask(grid: RasterGrid, cropland_codes=(2,), water_codes=(0,)) -> CroplandMask:
    """Translate another product's class numbering into the canonical codes.

    Any non-nodata code that is neither cropland nor water becomes non-cropland.
    """
    v = grid.values
    out = np.full(v.shape, NON_CROPLAND, dtype=np.float32)
    out[np.isin(v, list(water_codes))] = WATER
    out[np.isin(v, list(cropland_codes))] = CROPLAND
    out[(v == CATEGORICAL_NODATA) | np.isnan(v)] = CATEGORICAL_NODATA
    return CroplandMask(RasterGrid(grid.meta, BandKind.MASK, out))


def load_mask(path, cropland_codes=(2,), water_codes=(0,)) -> CroplandMask:
    return remap_mask(read_raster(path), cropland_codes, water_codes)


def apply_mask(stack: MonthlyStack, mask: CroplandMask) -> tuple[np.ndarray, np.ndarray]:
    """Cropland pixels with a complete 12-month signature.

    Returns flat row-major pixel indices (ascending) and the matching
    (n, 12) float64 signatures.
    """
    if stack.meta != mask.meta:
        raise AlignmentError(f"stack grid {stack.meta} != mask grid {mask.meta}")
    flat = stack.array.reshape(12, -1)
    complete = ~np.isnan(flat).any(axis=0)
    keep = np.flatnonzero(mask.cropland.ravel() & complete)
    return keep, flat[:, keep].T.astype(np.float64)


def load_climate(precip_paths, temp_paths, target: GridMeta) -> tuple[MonthlyStack, MonthlyStack]:
    """Read precipitation (mm/month) and temperature (°C) stacks and resample them onto ``target``.

    Each argument may be one path or a list; with several files the first one
    covering a pixel wins.
    """
    precip = [read_stack(p) for p in _as_list(precip_paths)]
    temp = [read_stack(p) for p in _as_list(temp_paths)]
    for s in precip:
        if s.band_kind is not BandKind.PRECIP_MM:
            raise ValueError(f"precipitation stack has band {s.band_kind.name}")
    for s in temp:
        if s.band_kind is not BandKind.TEMP_C:
            raise ValueError(f"temperature stack has band {s.band_kind.name}")
    return mosaic_stacks(precip, target), mosaic_stacks(temp, target)


def _as_list(paths) -> list:
    if isinstance(paths, (str, Path)):
        return [paths]
    return list(paths)
