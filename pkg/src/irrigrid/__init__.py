"""Irrigated vs rainfed cropland mapping from clustered monthly NDVI signatures."""

from .clustering import ClusterModel, kmeans_fit, select_model
from .evaluation import consistency_check, evaluate_points
from .ingest import CroplandMask, apply_mask, composite_monthly, compute_ndvi
from .pipeline import PredictionRaster, RegionInputs, TileSpec, predict_region, predict_tile, tile_aoi
from .raster import BandKind, GeoBox, GridMeta, MonthlyStack, RasterGrid, geobox_to_grid
from .seasons import HeuristicConfig, detect_peaks, label_cluster, label_season
from .synth import SynthScene, synth_generate

__version__ = "0.1.0"

__all__ = [
    "BandKind", "ClusterModel", "CroplandMask", "GeoBox", "GridMeta", "HeuristicConfig",
    "MonthlyStack", "PredictionRaster", "RasterGrid", "RegionInputs", "SynthScene", "TileSpec",
    "apply_mask", "composite_monthly", "compute_ndvi", "consistency_check", "detect_peaks",
    "evaluate_points", "geobox_to_grid", "kmeans_fit", "label_cluster", "label_season",
    "predict_region", "predict_tile", "select_model", "synth_generate", "tile_aoi",
]
