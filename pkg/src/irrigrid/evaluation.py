"""Shifted-region consistency and point-label accuracy for prediction rasters."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .clustering import DEFAULT_K_RANGE
from .pipeline import (
    IRRIGATED,
    NOT_CULTIVATED,
    RAINFED,
    PredictionRaster,
    RegionInputs,
    predict_region,
)
from .raster import GeoBox, RasterGrid
from .seasons import DEFAULT_CONFIG, HeuristicConfig

# (east, north) unit steps; each is multiplied by a third of the aoi edge
SHIFTS = ((-1, 1), (0, 1), (1, 1), (-1, 0), (1, 0), (-1, -1), (0, -1), (1, -1))


def _grid(r) -> RasterGrid:
    return r.grid if isinstance(r, PredictionRaster) else r


def _binary(values: np.ndarray) -> np.ndarray:
    """Fold NOT_CULTIVATED into RAINFED; everything unscorable becomes -1."""
    out = np.full(values.shape, -1, dtype=np.int8)
    out[(values == RAINFED) | (values == NOT_CULTIVATED)] = RAINFED
    out[values == IRRIGATED] = IRRIGATED
    return out


def shift_agreement(a, b) -> tuple[int, int]:
    """(agreeing, compared) cropland pixels where two label rasters on one lattice overlap."""
    ga, gb = _grid(a), _grid(b)
    dr, dc = ga.meta.offset_of(gb.meta)
    ha, wa = ga.meta.shape
    hb, wb = gb.meta.shape
    r0, r1 = max(0, dr), min(ha, dr + hb)
    c0, c1 = max(0, dc), min(wa, dc + wb)
    if r0 >= r1 or c0 >= c1:
        return 0, 0
    va = _binary(ga.values[r0:r1, c0:c1])
    vb = _binary(gb.values[r0 - dr:r1 - dr, c0 - dc:c1 - dc])
    both = (va >= 0) & (vb >= 0)
    return int((va[both] == vb[both]).sum()), int(both.sum())


@dataclass
class ConsistencyReport:
    shifts: list[dict]
    agreed: int
    compared: int

    @property
    def overall(self) -> float | None:
        return self.agreed / self.compared if self.compared else None

    @property
    def agreements(self) -> list[float | None]:
        return [s["agreement"] for s in self.shifts]

    def as_dict(self) -> dict:
        return {"overall": self.overall, "agreed": self.agreed, "compared": self.compared,
                "shifts": self.shifts}


def shift_offsets(aoi: GeoBox, pixel_size: float) -> tuple[int, int]:
    """A third of the aoi edge in whole pixels (east-west, north-south)."""
    return round(aoi.width / 3 / pixel_size), round(aoi.height / 3 / pixel_size)


def consistency_check(aoi: GeoBox, inputs: RegionInputs, config: HeuristicConfig = DEFAULT_CONFIG,
                      seed: int = 42, k_range=DEFAULT_K_RANGE, workers: int = 1) -> ConsistencyReport:
    """Compare the prediction for ``aoi`` with predictions for eight shifted copies of it.

    Shifts are a third of the edge length east/west, north/south and diagonally,
    rounded to whole pixels so overlapping pixels line up exactly.
    """
    ps = inputs.meta.pixel_size
    dx, dy = shift_offsets(aoi, ps)
    need = GeoBox(aoi.lon_min - dx * ps, aoi.lat_min - dy * ps,
                  aoi.lon_max + dx * ps, aoi.lat_max + dy * ps)
    if not inputs.meta.geobox.contains(need, tol=ps / 2):
        raise ValueError(f"inputs {inputs.meta.geobox} do not cover {aoi} plus a third-edge "
                         f"margin ({need})")
    base = predict_region(aoi, inputs, config, seed, workers, k_range)
    shifts, agreed, compared = [], 0, 0
    for sx, sy in SHIFTS:
        moved = aoi.translated(sx * dx * ps, sy * dy * ps)
        other = predict_region(moved, inputs, config, seed, workers, k_range)
        a, n = shift_agreement(base, other)
        agreed += a
        compared += n
        shifts.append({"east": sx, "north": sy, "dx_pixels": sx * dx, "dy_pixels": sy * dy,
                       "agreed": a, "compared": n, "agreement": a / n if n else None,
                       "failed_tiles": len(other.failed)})
    return ConsistencyReport(shifts, agreed, compared)


@dataclass(frozen=True)
class EvalPoint:
    lon: float
    lat: float
    truth: str

    def __post_init__(self):
        t = self.truth.strip().lower()
        if t not in ("irrigated", "rainfed"):
            raise ValueError(f"label must be 'irrigated' or 'rainfed', got {self.truth!r}")
        object.__setattr__(self, "truth", t)


def load_points(path) -> list[EvalPoint]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"lon", "lat", "label"} - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        return [EvalPoint(float(r["lon"]), float(r["lat"]), r["label"]) for r in reader]


@dataclass
class AccuracyReport:
    outcomes: list[dict]
    confusion: dict = field(default_factory=dict)

    @property
    def n_scored(self) -> int:
        return sum(o["status"] != "unscorable" for o in self.outcomes)

    @property
    def n_correct(self) -> int:
        return sum(o["status"] == "match" for o in self.outcomes)

    @property
    def n_unscorable(self) -> int:
        return len(self.outcomes) - self.n_scored

    @property
    def accuracy(self) -> float | None:
        return self.n_correct / self.n_scored if self.n_scored else None

    def as_dict(self) -> dict:
        return {"accuracy": self.accuracy, "n": self.n_scored, "correct": self.n_correct,
                "unscorable": self.n_unscorable, "confusion": self.confusion,
                "points": self.outcomes}


_NAMES = {RAINFED: "rainfed", IRRIGATED: "irrigated"}


def evaluate_points(raster, points) -> AccuracyReport:
    """Score labelled coordinates against the pixel that contains each one.

    Points off the raster or on non-cropland/nodata pixels are unscorable and
    do not count towards N. Confusion rows are truth, columns prediction.
    """
    grid = _grid(raster)
    confusion = {t: {p: 0 for p in ("irrigated", "rainfed")} for t in ("irrigated", "rainfed")}
    outcomes = []
    for pt in points:
        row, col = grid.meta.locate(pt.lon, pt.lat)
        row, col = int(row), int(col)
        rec = {"lon": pt.lon, "lat": pt.lat, "truth": pt.truth, "predicted": None}
        if not (0 <= row < grid.meta.height and 0 <= col < grid.meta.width):
            outcomes.append({**rec, "status": "unscorable", "reason": "outside raster"})
            continue
        code = int(_binary(grid.values[row:row + 1, col:col + 1])[0, 0])
        if code < 0:
            outcomes.append({**rec, "status": "unscorable",
                             "reason": f"pixel code {int(grid.values[row, col])}"})
            continue
        pred = _NAMES[code]
        confusion[pt.truth][pred] += 1
        outcomes.append({**rec, "predicted": pred,
                         "status": "match" if pred == pt.truth else "mismatch"})
    return AccuracyReport(outcomes, confusion)

