"""Per-tile prediction, 0.5° tiling, parallel execution and merge."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .clustering import DEFAULT_K_RANGE, ModelSelectionError, fit_best, select_model
from .ingest import CROPLAND, CroplandMask, apply_mask
from .raster import (
    CATEGORICAL_NODATA,
    AlignmentError,
    BandKind,
    GeoBox,
    GridMeta,
    MonthlyStack,
    RasterGrid,
    mosaic_stacks,
    snapped_ceil,
)
from .seasons import DEFAULT_CONFIG, HeuristicConfig, label_cluster

log = logging.getLogger(__name__)

RAINFED, IRRIGATED, NOT_CULTIVATED, NON_CROPLAND = 0, 1, 2, 3
NODATA = int(CATEGORICAL_NODATA)
TILE_EDGE = 0.5
LABEL_NAMES = {RAINFED: "rainfed", IRRIGATED: "irrigated",
               NOT_CULTIVATED: "not_cultivated", NON_CROPLAND: "non_cropland"}


class CoverageError(ValueError):
    """Inputs do not cover a tile."""


@dataclass(frozen=True)
class TileSpec:
    geobox: GeoBox
    row: int = 0
    col: int = 0

    def __post_init__(self):
        if self.geobox.width > TILE_EDGE + 1e-12 or self.geobox.height > TILE_EDGE + 1e-12:
            raise ValueError(f"tile edges must be <= {TILE_EDGE} degrees: {self.geobox}")


@dataclass(eq=False)
class PredictionRaster:
    grid: RasterGrid
    provenance: list[dict] = field(default_factory=list)

    @property
    def failed(self) -> list[dict]:
        return [p for p in self.provenance if p.get("status") == "failed"]


@dataclass(frozen=True, eq=False)
class RegionInputs:
    """Everything a region prediction reads. NDVI and mask share one grid;
    climate stacks may be coarser and are resampled per tile (first stack wins)."""

    ndvi: MonthlyStack
    mask: CroplandMask
    precip: Sequence[MonthlyStack]
    temp: Sequence[MonthlyStack]

    def __post_init__(self):
        if self.ndvi.meta != self.mask.meta:
            raise AlignmentError(f"NDVI grid {self.ndvi.meta} != mask grid {self.mask.meta}")
        for name in ("precip", "temp"):
            v = getattr(self, name)
            if isinstance(v, MonthlyStack):
                object.__setattr__(self, name, (v,))
            else:
                object.__setattr__(self, name, tuple(v))

    @property
    def meta(self) -> GridMeta:
        return self.ndvi.meta


def tile_seed(seed: int, row: int, col: int) -> int:
    return int(np.random.SeedSequence([seed, row, col]).generate_state(1)[0])


def tile_aoi(aoi: GeoBox, edge: float = TILE_EDGE) -> list[TileSpec]:
    """Row-major tiles anchored at the north-west corner; edge tiles are clipped to ``aoi``."""
    n_cols = snapped_ceil(aoi.width / edge)
    n_rows = snapped_ceil(aoi.height / edge)
    tiles = []
    for r in range(n_rows):
        lat_max = aoi.lat_max - r * edge
        lat_min = aoi.lat_max - (r + 1) * edge if r < n_rows - 1 else aoi.lat_min
        for c in range(n_cols):
            lon_min = aoi.lon_min + c * edge
            lon_max = aoi.lon_min + (c + 1) * edge if c < n_cols - 1 else aoi.lon_max
            tiles.append(TileSpec(GeoBox(lon_min, lat_min, lon_max, lat_max), r, c))
    return tiles


def _first_index(x: float) -> int:
    """First lattice pixel whose center is at or past the boundary coordinate ``x`` (in pixels)."""
    return math.ceil(x - 0.5 - 1e-9)


def pixel_window(meta: GridMeta, box: GeoBox) -> tuple[int, int, int, int]:
    """(row0, col0, height, width) of the pixels of ``meta`` whose centers lie inside ``box``.

    Shared edges between adjacent boxes go to exactly one side, so abutting
    tiles get disjoint windows.
    """
    ps = meta.pixel_size
    c0 = _first_index((box.lon_min - meta.origin_lon) / ps)
    c1 = _first_index((box.lon_max - meta.origin_lon) / ps)
    r0 = _first_index((meta.origin_lat - box.lat_max) / ps)
    r1 = _first_index((meta.origin_lat - box.lat_min) / ps)
    return r0, c0, r1 - r0, c1 - c0


def _in_bounds(meta: GridMeta, window) -> bool:
    r0, c0, h, w = window
    return r0 >= 0 and c0 >= 0 and r0 + h <= meta.height and c0 + w <= meta.width


def _paint(grid_values: np.ndarray, mask: CroplandMask):
    m = mask.grid.values
    grid_values[(m != CROPLAND) & (m != CATEGORICAL_NODATA)] = NON_CROPLAND
    grid_values[m == CATEGORICAL_NODATA] = NODATA


def _cluster_climate(members, precip_px, temp_px):
    return precip_px[members].mean(axis=0), temp_px[members].mean(axis=0)


def predict_tile(tile: TileSpec, ndvi: MonthlyStack, mask: CroplandMask,
                 precip: MonthlyStack, temp: MonthlyStack,
                 config: HeuristicConfig = DEFAULT_CONFIG, seed: int = 42,
                 k_range=DEFAULT_K_RANGE) -> PredictionRaster:
    """Mask, cluster, label one tile. All stacks must already be on the tile grid."""
    meta = ndvi.meta
    for name, g in (("mask", mask.meta), ("precip", precip.meta), ("temp", temp.meta)):
        if g != meta:
            raise AlignmentError(f"{name} grid {g} != NDVI grid {meta}")
    out = np.full(meta.shape, NODATA, dtype=np.float32)
    _paint(out, mask)
    report = {"tile_row": tile.row, "tile_col": tile.col,
              "geobox": list(_box_tuple(tile.geobox)), "seed": seed,
              "status": "ok", "warnings": []}

    idx, points = apply_mask(ndvi, mask)
    n_crop = int(mask.cropland.sum())
    report["cropland_pixels"] = n_crop
    report["clustered_pixels"] = len(idx)
    if n_crop > len(idx):
        report["warnings"].append(
            f"{n_crop - len(idx)} cropland pixels have incomplete NDVI and stay nodata")
    if len(idx) == 0:
        report["warnings"].append("no cropland pixels with complete NDVI in tile")
        report["k"] = None
        return PredictionRaster(RasterGrid(meta, BandKind.LABEL, out), [report])

    precip_px = precip.array.reshape(12, -1)[:, idx].T.astype(np.float64)
    temp_px = temp.array.reshape(12, -1)[:, idx].T.astype(np.float64)
    if np.isnan(precip_px).any() or np.isnan(temp_px).any():
        raise CoverageError(f"climate nodata inside tile ({tile.row}, {tile.col})")

    codes = np.empty(len(idx), dtype=np.float32)
    k_lo, k_hi = k_range
    if len(idx) < 2 * k_hi:
        report["warnings"].append(
            f"only {len(idx)} cropland pixels (< {2 * k_hi}); labelled per pixel")
        report["k"] = None
        for i in range(len(idx)):
            codes[i] = label_cluster(points[i], precip_px[i], temp_px[i], config).overall.value
    else:
        try:
            sel = select_model(points, k_range, seed)
            model = sel.model
            report["scores"] = [s.as_dict() for s in sel.scores]
            report["metric_sample_size"] = sel.sample_size
        except ModelSelectionError as exc:
            # e.g. every signature identical: one cluster is the honest answer
            report["warnings"].append(f"model selection failed ({exc}); using k=1")
            model = fit_best(points, 1, seed)
            report["scores"] = []
        report["k"] = model.k
        clusters = []
        for j in range(model.k):
            members = model.assignments == j
            if not members.any():
                continue
            centroid = points[members].mean(axis=0)
            p, t = _cluster_climate(members, precip_px, temp_px)
            lab = label_cluster(centroid, p, t, config, cluster=j)
            codes[members] = lab.overall.value
            clusters.append({**lab.as_dict(), "size": int(members.sum()),
                             "centroid": centroid.tolist(),
                             "precip_mm": p.tolist(), "temp_c": t.tolist()})
        report["clusters"] = clusters
    out.reshape(-1)[idx] = codes
    return PredictionRaster(RasterGrid(meta, BandKind.LABEL, out), [report])


def _box_tuple(b: GeoBox):
    return (b.lon_min, b.lat_min, b.lon_max, b.lat_max)


def region_grid(meta: GridMeta, aoi: GeoBox) -> tuple[GridMeta, tuple[int, int, int, int]]:
    """The output grid for ``aoi`` on the input lattice, and its window in the input."""
    win = pixel_window(meta, aoi)
    r0, c0, h, w = win
    if h < 1 or w < 1:
        raise ValueError(f"aoi {aoi} contains no pixel centers of the input grid")
    return meta.window(r0, c0, h, w), win


def _prepare(tile: TileSpec, inputs: RegionInputs):
    win = pixel_window(inputs.meta, tile.geobox)
    if win[2] < 1 or win[3] < 1:
        return None
    if not _in_bounds(inputs.meta, win):
        raise CoverageError(f"NDVI/mask grid does not cover tile {_box_tuple(tile.geobox)}")
    ndvi = inputs.ndvi.window(*win)
    mask = inputs.mask.window(*win)
    try:
        precip = mosaic_stacks(inputs.precip, ndvi.meta)
        temp = mosaic_stacks(inputs.temp, ndvi.meta)
    except ValueError as exc:
        raise CoverageError(f"climate does not cover tile: {exc}") from None
    return win, ndvi, mask, precip, temp


def _run_tile(job):
    tile, ndvi, mask, precip, temp, config, seed, k_range = job
    try:
        return predict_tile(tile, ndvi, mask, precip, temp, config, seed, k_range), None
    except CoverageError as exc:
        return None, str(exc)


def predict_region(aoi: GeoBox, inputs: RegionInputs, config: HeuristicConfig = DEFAULT_CONFIG,
                   seed: int = 42, workers: int = 1, k_range=DEFAULT_K_RANGE,
                   edge: float = TILE_EDGE) -> PredictionRaster:
    """Tile ``aoi``, predict each tile (optionally in worker processes) and merge.

    A tile that cannot be predicted is left nodata and recorded with status
    ``"failed"``; the rest of the region still completes. The result is
    identical for any ``workers``.
    """
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    out_meta, (R0, C0, H, W) = region_grid(inputs.meta, aoi)
    out = np.full(out_meta.shape, NODATA, dtype=np.float32)
    jobs, windows, records = [], [], {}
    for tile in tile_aoi(aoi, edge):
        tseed = tile_seed(seed, tile.row, tile.col)
        base = {"tile_row": tile.row, "tile_col": tile.col,
                "geobox": list(_box_tuple(tile.geobox)), "seed": tseed}
        try:
            prepared = _prepare(tile, inputs)
        except CoverageError as exc:
            records[(tile.row, tile.col)] = {**base, "status": "failed", "error": str(exc),
                                             "warnings": []}
            log.warning("tile (%d, %d) failed: %s", tile.row, tile.col, exc)
            continue
        if prepared is None:
            continue
        win, ndvi, mask, precip, temp = prepared
        jobs.append((tile, ndvi, mask, precip, temp, config, tseed, k_range))
        windows.append((tile, win, base))

    if workers == 1 or len(jobs) <= 1:
        results = [_run_tile(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            results = list(pool.map(_run_tile, jobs))

    for (tile, (r0, c0, h, w), base), (pred, err) in zip(windows, results):
        if pred is None:
            records[(tile.row, tile.col)] = {**base, "status": "failed", "error": err,
                                             "warnings": []}
            log.warning("tile (%d, %d) failed: %s", tile.row, tile.col, err)
            continue
        out[r0 - R0:r0 - R0 + h, c0 - C0:c0 - C0 + w] = pred.grid.values
        records[(tile.row, tile.col)] = pred.provenance[0]
    provenance = [records[key] for key in sorted(records)]
    return PredictionRaster(RasterGrid(out_meta, BandKind.LABEL, out), provenance)

