"""Synthetic scenes with known irrigation truth.

A scene is a rectangle of the lat/lon lattice partitioned into rectangular
regions. Each cropland region has a crop calendar (peak month, peak NDVI,
irrigated flag) and a monthly climate consistent with that flag under the
labelling thresholds. JSON form::

    {
      "bounds": [lon_min, lat_min, lon_max, lat_max],
      "pixel_size": 0.0025,
      "noise_sigma": 0.05,          # optional, default 0
      "seed": 0,                    # optional, default 0
      "baseline_ndvi": 0.15,        # optional
      "peak_width_months": 1.0,     # optional, Gaussian width of the NDVI bump
      "regions": [
        {"bounds": [...], "land": "cropland",   # or "non_cropland" / "water"
         "peak_month": 3, "amplitude": 0.6, "irrigated": true,
         "precip_mm": [12 values],              # optional
         "temp_c": [12 values]}                 # optional, default 25 °C
      ]
    }

Without ``precip_mm`` an irrigated region is dry all year (20 mm/month) and a
rainfed one gets 150 mm/month in its peak month and the month before.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .ingest import CROPLAND, NON_CROPLAND, WATER, CroplandMask
from .pipeline import IRRIGATED, NON_CROPLAND as LABEL_NON_CROPLAND, NOT_CULTIVATED, RAINFED
from .pipeline import RegionInputs
from .raster import (
    BandKind,
    GeoBox,
    GridMeta,
    MonthlyStack,
    RasterGrid,
    atomic_write,
    geobox_to_grid,
    write_raster,
    write_stack,
)
from .seasons import DEFAULT_CONFIG, HeuristicConfig

DRY_MM = 20.0
WET_MM = 150.0
DEFAULT_TEMP_C = 25.0
LAND = {"cropland": CROPLAND, "non_cropland": NON_CROPLAND, "water": WATER}


@dataclass(frozen=True)
class SynthRegion:
    bounds: GeoBox
    land: str = "cropland"
    peak_month: int = 6
    amplitude: float = 0.6
    irrigated: bool = False
    precip_mm: tuple[float, ...] | None = None
    temp_c: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.land not in LAND:
            raise ValueError(f"land must be one of {sorted(LAND)}, got {self.land!r}")
        if not 1 <= self.peak_month <= 12:
            raise ValueError(f"peak_month must be in 1..12, got {self.peak_month}")
        if not -1 <= self.amplitude <= 1:
            raise ValueError(f"amplitude must be a valid NDVI, got {self.amplitude}")
        for name in ("precip_mm", "temp_c"):
            v = getattr(self, name)
            if v is not None:
                if len(v) != 12:
                    raise ValueError(f"{name} needs 12 values, got {len(v)}")
                object.__setattr__(self, name, tuple(float(x) for x in v))

    def climate(self) -> tuple[np.ndarray, np.ndarray]:
        if self.precip_mm is not None:
            precip = np.array(self.precip_mm)
        else:
            precip = np.full(12, DRY_MM)
            if not self.irrigated:
                i = self.peak_month - 1
                precip[[i, (i - 1) % 12]] = WET_MM
        temp = np.array(self.temp_c) if self.temp_c is not None else np.full(12, DEFAULT_TEMP_C)
        return precip, temp

    def truth(self, config: HeuristicConfig) -> int:
        if self.land != "cropland":
            return LABEL_NON_CROPLAND
        if not self.amplitude > config.ndvi_peak_threshold:
            return NOT_CULTIVATED
        return IRRIGATED if self.irrigated else RAINFED

    def check_climate(self, config: HeuristicConfig):
        """The region's climate must make its irrigated flag true under ``config``."""
        if self.land != "cropland" or not self.amplitude > config.ndvi_peak_threshold:
            return
        precip, temp = self.climate()
        i = self.peak_month - 1
        mean_p = (precip[i] + precip[(i - 1) % 12]) / 2
        mean_t = (temp[i] + temp[(i - 1) % 12]) / 2
        dry = mean_p < config.water_need(mean_t)
        if dry != self.irrigated:
            raise ValueError(
                f"region {self.bounds}: peak-window precipitation {mean_p} mm at {mean_t} °C "
                f"contradicts irrigated={self.irrigated}")


@dataclass(frozen=True)
class SynthScene:
    bounds: GeoBox
    pixel_size: float
    regions: tuple[SynthRegion, ...]
    noise_sigma: float = 0.0
    seed: int = 0
    baseline_ndvi: float = 0.15
    peak_width_months: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "regions", tuple(self.regions))
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if self.peak_width_months <= 0:
            raise ValueError("peak_width_months must be > 0")

    @property
    def meta(self) -> GridMeta:
        return geobox_to_grid(self.bounds, self.pixel_size)

    def with_(self, **changes) -> SynthScene:
        return replace(self, **changes)

    @classmethod
    def from_dict(cls, d: dict) -> SynthScene:
        regions = []
        for r in d["regions"]:
            r = dict(r)
            r["bounds"] = GeoBox(*r["bounds"])
            regions.append(SynthRegion(**r))
        extra = {k: d[k] for k in ("noise_sigma", "seed", "baseline_ndvi", "peak_width_months")
                 if k in d}
        return cls(GeoBox(*d["bounds"]), float(d["pixel_size"]), tuple(regions), **extra)

    def to_dict(self) -> dict:
        def box(b):
            return [b.lon_min, b.lat_min, b.lon_max, b.lat_max]
        regions = []
        for r in self.regions:
            rd = {"bounds": box(r.bounds), "land": r.land, "peak_month": r.peak_month,
                  "amplitude": r.amplitude, "irrigated": r.irrigated}
            if r.precip_mm is not None:
                rd["precip_mm"] = list(r.precip_mm)
            if r.temp_c is not None:
                rd["temp_c"] = list(r.temp_c)
            regions.append(rd)
        return {"bounds": box(self.bounds), "pixel_size": self.pixel_size,
                "noise_sigma": self.noise_sigma, "seed": self.seed,
                "baseline_ndvi": self.baseline_ndvi,
                "peak_width_months": self.peak_width_months, "regions": regions}


def load_scene(path) -> SynthScene:
    return SynthScene.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True, eq=False)
class SynthOutputs:
    ndvi: MonthlyStack
    mask: CroplandMask
    precip: MonthlyStack
    temp: MonthlyStack
    truth: RasterGrid
    scene: SynthScene = field(repr=False)

    @property
    def inputs(self) -> RegionInputs:
        return RegionInputs(self.ndvi, self.mask, [self.precip], [self.temp])

    def save(self, out_dir) -> dict:
        """Write the five rasters plus ``scene.json``; returns the written paths."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {"ndvi": out / "ndvi.irgs", "mask": out / "mask.irg1",
                 "precip": out / "precip.irgs", "temp": out / "temp.irgs",
                 "truth": out / "truth.irg1", "scene": out / "scene.json"}
        write_stack(self.ndvi, paths["ndvi"])
        write_raster(self.mask.grid, paths["mask"])
        write_stack(self.precip, paths["precip"])
        write_stack(self.temp, paths["temp"])
        write_raster(self.truth, paths["truth"])
        atomic_write(paths["scene"], json.dumps(self.scene.to_dict(), indent=2))
        return paths


def ndvi_curve(peak_month: int, amplitude: float, baseline: float, width: float) -> np.ndarray:
    """Baseline NDVI with a Gaussian bump that reaches ``amplitude`` at the peak month."""
    months = np.arange(12)
    d = np.abs(months - (peak_month - 1)) % 12
    d = np.minimum(d, 12 - d)
    return baseline + (amplitude - baseline) * np.exp(-0.5 * (d / width) ** 2)


def region_index(scene: SynthScene) -> np.ndarray:
    """Region number of every pixel, by pixel center. Overlaps or gaps raise ValueError."""
    meta = scene.meta
    lon, lat = meta.pixel_centers()
    owner = np.full(meta.shape, -1, dtype=np.int64)
    for i, r in enumerate(scene.regions):
        b = r.bounds
        inside = (((lat >= b.lat_min) & (lat < b.lat_max))[:, None]
                  & ((lon >= b.lon_min) & (lon < b.lon_max))[None, :])
        clash = inside & (owner >= 0)
        if clash.any():
            j = int(owner[clash][0])
            raise ValueError(f"regions {j} and {i} overlap")
        owner[inside] = i
    if (owner < 0).any():
        raise ValueError(f"{int((owner < 0).sum())} pixels are not covered by any region")
    return owner


def synth_generate(scene: SynthScene, config: HeuristicConfig = DEFAULT_CONFIG) -> SynthOutputs:
    meta = scene.meta
    owner = region_index(scene)
    n_reg = len(scene.regions)
    curves = np.empty((n_reg, 12))
    precip = np.empty((n_reg, 12))
    temp = np.empty((n_reg, 12))
    mask_codes = np.empty(n_reg)
    truth_codes = np.empty(n_reg)
    for i, r in enumerate(scene.regions):
        r.check_climate(config)
        if r.land == "cropland":
            curves[i] = ndvi_curve(r.peak_month, r.amplitude, scene.baseline_ndvi,
                                   scene.peak_width_months)
        else:
            curves[i] = scene.baseline_ndvi if r.land == "non_cropland" else -0.1
        precip[i], temp[i] = r.climate()
        mask_codes[i] = LAND[r.land]
        truth_codes[i] = r.truth(config)

    ndvi = np.moveaxis(curves[owner], -1, 0)
    if scene.noise_sigma > 0:
        rng = np.random.default_rng(scene.seed)
        ndvi = ndvi + rng.normal(0.0, scene.noise_sigma, size=ndvi.shape)
    ndvi = np.clip(ndvi, -1.0, 1.0)
    return SynthOutputs(
        ndvi=MonthlyStack.from_array(meta, BandKind.NDVI, ndvi),
        mask=CroplandMask(RasterGrid(meta, BandKind.MASK, mask_codes[owner])),
        precip=MonthlyStack.from_array(meta, BandKind.PRECIP_MM, np.moveaxis(precip[owner], -1, 0)),
        temp=MonthlyStack.from_array(meta, BandKind.TEMP_C, np.moveaxis(temp[owner], -1, 0)),
        truth=RasterGrid(meta, BandKind.LABEL, truth_codes[owner]),
        scene=scene,
    )


def two_population_scene(bounds: GeoBox = GeoBox(0.0, 0.0, 0.5, 0.5), pixel_size: float = 0.0025,
                         noise_sigma: float = 0.0, seed: int = 0,
                         irrigated_peak: int = 3, rainfed_peak: int = 8,
                         amplitude: float = 0.6) -> SynthScene:
    """West half irrigated with a dry-season peak, east half rainfed with a wet-season peak."""
    mid = (bounds.lon_min + bounds.lon_max) / 2
    west = GeoBox(bounds.lon_min, bounds.lat_min, mid, bounds.lat_max)
    east = GeoBox(mid, bounds.lat_min, bounds.lon_max, bounds.lat_max)
    return SynthScene(bounds, pixel_size, (
        SynthRegion(west, peak_month=irrigated_peak, amplitude=amplitude, irrigated=True),
        SynthRegion(east, peak_month=rainfed_peak, amplitude=amplitude, irrigated=False),
    ), noise_sigma=noise_sigma, seed=seed)
