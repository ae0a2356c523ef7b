"""Crop-season detection on a 12-month NDVI signature and the irrigated/rainfed rule.

Months are numbered 1..12 and the year is treated as circular, so a season
peaking in January looks back to December.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class Verdict(enum.Enum):
    IRRIGATED = "irrigated"
    RAINFED = "rainfed"


class Overall(enum.Enum):
    RAINFED = 0
    IRRIGATED = 1
    NOT_CULTIVATED = 2


@dataclass(frozen=True)
class HeuristicConfig:
    ndvi_peak_threshold: float = 0.3
    precip_threshold_mm: float = 100.0
    cold_precip_threshold_mm: float = 85.0
    cold_temp_c: float = 15.0
    min_peak_separation_months: int = 3

    def __post_init__(self):
        for name in ("ndvi_peak_threshold", "precip_threshold_mm",
                     "cold_precip_threshold_mm", "cold_temp_c", "min_peak_separation_months"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")
        if not self.cold_precip_threshold_mm < self.precip_threshold_mm:
            raise ValueError("cold_precip_threshold_mm must be below precip_threshold_mm")

    def water_need(self, temp_c: float) -> float:
        """Precipitation threshold (mm/month) active at this temperature."""
        if temp_c < self.cold_temp_c:
            return self.cold_precip_threshold_mm
        return self.precip_threshold_mm


DEFAULT_CONFIG = HeuristicConfig()


@dataclass(frozen=True)
class CropSeason:
    peak_month: int
    peak_ndvi: float
    mean_precip_mm: float
    mean_temp_c: float

    def as_dict(self) -> dict:
        return {"peak_month": self.peak_month, "peak_ndvi": self.peak_ndvi,
                "mean_precip_mm": self.mean_precip_mm, "mean_temp_c": self.mean_temp_c}


@dataclass(frozen=True)
class SeasonLabel:
    season: CropSeason
    verdict: Verdict
    cultivated: bool


@dataclass(frozen=True)
class ClusterLabel:
    cluster: int
    seasons: tuple[SeasonLabel, ...]
    overall: Overall

    def as_dict(self) -> dict:
        return {"cluster": self.cluster, "overall": self.overall.name,
                "seasons": [{**s.season.as_dict(), "verdict": s.verdict.name,
                             "cultivated": s.cultivated} for s in self.seasons]}


def circular_distance(a: int, b: int, n: int = 12) -> int:
    d = abs(a - b) % n
    return min(d, n - d)


def _candidates(v: np.ndarray) -> list[int]:
    """0-based starts of plateaus that are strictly above both circular neighbours."""
    n = len(v)
    change = np.flatnonzero(v != np.roll(v, 1))
    if change.size == 0:
        return []
    # walk runs of equal values beginning at each change point
    out = []
    for i, start in enumerate(change):
        end = change[(i + 1) % len(change)]  # first index of the next run
        before = v[(start - 1) % n]
        after = v[end % n]
        if v[start] > before and v[start] > after:
            out.append(int(start))
    return out


def detect_peaks(centroid, config: HeuristicConfig = DEFAULT_CONFIG) -> list[int]:
    """Peak months (1..12) in acceptance order: tallest first, ties to the earlier month.

    A candidate closer than ``min_peak_separation_months`` (circularly) to an
    already accepted peak is dropped.
    """
    v = np.asarray(centroid, dtype=np.float64)
    if v.shape != (12,):
        raise ValueError(f"expected 12 monthly values, got shape {v.shape}")
    if np.isnan(v).any():
        raise ValueError("centroid contains nodata")
    order = sorted(_candidates(v), key=lambda m: (-v[m], m))
    accepted: list[int] = []
    for m in order:
        if all(circular_distance(m, a) >= config.min_peak_separation_months for a in accepted):
            accepted.append(m)
    return [m + 1 for m in accepted]


def build_season(peak_month: int, centroid, precip, temp) -> CropSeason:
    if not 1 <= peak_month <= 12:
        raise ValueError(f"peak_month must be in 1..12, got {peak_month}")
    i = peak_month - 1
    prev = (i - 1) % 12
    return CropSeason(peak_month, float(centroid[i]),
                      (float(precip[prev]) + float(precip[i])) / 2,
                      (float(temp[prev]) + float(temp[i])) / 2)


def is_cultivated(season: CropSeason, config: HeuristicConfig = DEFAULT_CONFIG) -> bool:
    return season.peak_ndvi > config.ndvi_peak_threshold


def label_season(season: CropSeason, config: HeuristicConfig = DEFAULT_CONFIG) -> Verdict:
    if is_cultivated(season, config) and season.mean_precip_mm < config.water_need(season.mean_temp_c):
        return Verdict.IRRIGATED
    return Verdict.RAINFED


def label_cluster(centroid, precip, temp, config: HeuristicConfig = DEFAULT_CONFIG,
                  cluster: int = 0) -> ClusterLabel:
    seasons = []
    for month in detect_peaks(centroid, config):
        s = build_season(month, centroid, precip, temp)
        seasons.append(SeasonLabel(s, label_season(s, config), is_cultivated(s, config)))
    if any(s.verdict is Verdict.IRRIGATED for s in seasons):
        overall = Overall.IRRIGATED
    elif any(s.cultivated for s in seasons):
        overall = Overall.RAINFED
    else:
        overall = Overall.NOT_CULTIVATED
    return ClusterLabel(cluster, tuple(seasons), overall)
