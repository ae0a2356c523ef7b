"""``irrigrid`` command line: predict, consistency, evaluate, synth, metrics, info.

Exit status: 0 success, 1 partial tile failure or internal error, 2 usage error.
Diagnostics go to stderr; reports go to stdout or to the files named on the
command line.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .clustering import KScore, UndefinedMetricError, InvalidModelError
from .clustering import calinski_harabasz, davies_bouldin, fit_best, silhouette
from .evaluation import consistency_check, evaluate_points, load_points
from .ingest import composite_csv, load_mask
from .pipeline import IRRIGATED, NODATA, NON_CROPLAND, NOT_CULTIVATED, RAINFED, RegionInputs
from .pipeline import predict_region
from .raster import GeoBox, atomic_write, geobox_to_grid, read_header, read_stack, write_raster
from .seasons import HeuristicConfig
from .synth import load_scene, synth_generate

log = logging.getLogger("irrigrid")

DEFAULT_SEED = 42
DEFAULT_PIXEL_SIZE = 0.00025
LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING,
              "info": logging.INFO, "debug": logging.DEBUG}
INPUT_FILES = {"ndvi": "ndvi.irgs", "mask": "mask.irg1", "precip": "precip.irgs",
               "temp": "temp.irgs"}
# rainfed red, irrigated green
PALETTE = {RAINFED: (215, 48, 39), IRRIGATED: (26, 152, 80), NOT_CULTIVATED: (254, 224, 139),
           NON_CROPLAND: (190, 190, 190), NODATA: (0, 0, 0)}


@dataclass
class RunConfig:
    command: str
    seed: int = DEFAULT_SEED
    workers: int = 1
    k_range: tuple[int, int] = (2, 6)
    heuristic: HeuristicConfig = field(default_factory=HeuristicConfig)
    pixel_size: float = DEFAULT_PIXEL_SIZE
    aoi: GeoBox | None = None
    ndvi: Path | None = None
    mask: Path | None = None
    precip: list[Path] = field(default_factory=list)
    temp: list[Path] = field(default_factory=list)
    out: Path | None = None
    provenance: Path | None = None
    png: Path | None = None
    raster: Path | None = None
    points: Path | None = None
    spec: Path | None = None
    out_dir: Path | None = None
    paths: list[Path] = field(default_factory=list)
    cropland_codes: tuple[int, ...] = (2,)
    water_codes: tuple[int, ...] = (0,)
    log_level: str = "warn"


def _aoi(text):
    try:
        return GeoBox.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _positive_float(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {text}")
    return v


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {text}")
    return v


def _codes(text):
    try:
        return tuple(int(c) for c in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _add_common(p, heuristic=True, clustering=True):
    p.add_argument("--seed", type=int, default=DEFAULT_SEED, help="global RNG seed (default 42)")
    p.add_argument("--log-level", choices=sorted(LOG_LEVELS),
                   help="overrides the IRRIGRID_LOG environment variable")
    if clustering:
        p.add_argument("--workers", type=_positive_int, default=1)
        p.add_argument("--k-min", type=int, default=2)
        p.add_argument("--k-max", type=int, default=6)
    if heuristic:
        g = p.add_argument_group("labelling heuristic")
        g.add_argument("--ndvi-peak", type=_positive_float, default=0.3)
        g.add_argument("--precip-mm", type=_positive_float, default=100.0)
        g.add_argument("--cold-precip-mm", type=_positive_float, default=85.0)
        g.add_argument("--cold-temp-c", type=_positive_float, default=15.0)
        g.add_argument("--min-peak-sep", type=_positive_int, default=3)


def _add_inputs(p, required):
    p.add_argument("--aoi", type=_aoi, required=True, help="lon0,lat0,lon1,lat1")
    p.add_argument("--ndvi", type=Path, required=required,
                   help="IRGS NDVI stack, or an observation CSV to composite")
    p.add_argument("--mask", type=Path, required=required, help="IRG1 cropland mask")
    p.add_argument("--precip", type=Path, action="append", required=required,
                   help="IRGS precipitation stack (repeatable; first covering file wins)")
    p.add_argument("--temp", type=Path, action="append", required=required,
                   help="IRGS temperature stack (repeatable)")
    p.add_argument("--pixel-size", type=_positive_float, default=DEFAULT_PIXEL_SIZE,
                   help="degrees per pixel when compositing an observation CSV")
    p.add_argument("--cropland-codes", type=_codes, default=(2,))
    p.add_argument("--water-codes", type=_codes, default=(0,))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="irrigrid", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("predict", help="label cropland pixels irrigated/rainfed")
    _add_inputs(p, required=True)
    p.add_argument("--out", type=Path, required=True, help="output IRG1 label raster")
    p.add_argument("--provenance", type=Path,
                   help="per-tile JSON lines report (default: stdout)")
    p.add_argument("--png", type=Path, help="colour-mapped preview image")
    _add_common(p)

    p = sub.add_parser("consistency", help="agreement with eight shifted predictions")
    _add_inputs(p, required=False)
    p.add_argument("--inputs", type=Path,
                   help="directory with ndvi.irgs, mask.irg1, precip.irgs, temp.irgs")
    p.add_argument("--out", type=Path, help="JSON report (default: stdout)")
    _add_common(p)

    p = sub.add_parser("evaluate", help="accuracy against labelled points")
    p.add_argument("--raster", type=Path, required=True)
    p.add_argument("--points", type=Path, required=True, help="CSV with lon,lat,label")
    p.add_argument("--out", type=Path, help="JSON report (default: stdout)")
    _add_common(p, heuristic=False, clustering=False)

    p = sub.add_parser("synth", help="generate a synthetic scene with truth")
    p.add_argument("--spec", type=Path, required=True, help="scene JSON")
    p.add_argument("--out-dir", type=Path, required=True)
    _add_common(p, clustering=False)

    p = sub.add_parser("metrics", help="per-k inertia and quality indices for a points CSV")
    p.add_argument("--points", type=Path, required=True, help="CSV with 12 NDVI columns")
    _add_common(p, heuristic=False)

    p = sub.add_parser("info", help="dump IRG1/IRGS headers")
    p.add_argument("paths", type=Path, nargs="+")
    p.add_argument("--log-level", choices=sorted(LOG_LEVELS))
    return parser


def parse_args(argv=None) -> RunConfig:
    parser = build_parser()
    a = parser.parse_args(argv)
    cfg = RunConfig(command=a.command)
    cfg.seed = getattr(a, "seed", DEFAULT_SEED)
    cfg.log_level = a.log_level or os.environ.get("IRRIGRID_LOG", "warn")
    if cfg.log_level not in LOG_LEVELS:
        parser.error(f"IRRIGRID_LOG must be one of {sorted(LOG_LEVELS)}, got {cfg.log_level!r}")
    if hasattr(a, "workers"):
        cfg.workers = a.workers
        if not 2 <= a.k_min <= a.k_max:
            parser.error(f"need 2 <= --k-min <= --k-max, got {a.k_min}, {a.k_max}")
        cfg.k_range = (a.k_min, a.k_max)
    if hasattr(a, "ndvi_peak"):
        try:
            cfg.heuristic = HeuristicConfig(a.ndvi_peak, a.precip_mm, a.cold_precip_mm,
                                            a.cold_temp_c, a.min_peak_sep)
        except ValueError as exc:
            parser.error(str(exc))
    for name in ("aoi", "ndvi", "mask", "out", "provenance", "png", "raster", "points",
                 "spec", "out_dir", "paths", "pixel_size", "cropland_codes", "water_codes"):
        if getattr(a, name, None) is not None:
            setattr(cfg, name, getattr(a, name))
    cfg.precip = list(getattr(a, "precip", None) or [])
    cfg.temp = list(getattr(a, "temp", None) or [])

    if a.command == "consistency":
        if a.inputs is not None:
            if not a.inputs.is_dir():
                parser.error(f"--inputs {a.inputs} is not a directory")
            for key, fname in INPUT_FILES.items():
                if key in ("precip", "temp"):
                    if not getattr(cfg, key):
                        setattr(cfg, key, [a.inputs / fname])
                elif getattr(cfg, key) is None:
                    setattr(cfg, key, a.inputs / fname)
        missing = [k for k in INPUT_FILES if not getattr(cfg, k)]
        if missing:
            parser.error(f"missing inputs {missing}: pass --inputs DIR or the individual flags")

    _validate_paths(parser, cfg)
    return cfg


def _validate_paths(parser, cfg: RunConfig):
    inputs = [cfg.ndvi, cfg.mask, cfg.raster, cfg.points, cfg.spec, *cfg.paths]
    for path in inputs:
        if path is not None and not path.is_file():
            parser.error(f"input file not found: {path}")
    for path in (cfg.out, cfg.provenance, cfg.png):
        if path is not None and not path.resolve().parent.is_dir():
            parser.error(f"output directory does not exist: {path.parent}")
    # climate files may legitimately be absent for some tiles; only warn later
    if cfg.command == "predict" and not any(p.is_file() for p in cfg.precip):
        parser.error("none of the --precip files exist")
    if cfg.command == "predict" and not any(p.is_file() for p in cfg.temp):
        parser.error("none of the --temp files exist")


def _setup_logging(level: str):
    logging.basicConfig(level=LOG_LEVELS[level], stream=sys.stderr,
                        format="irrigrid %(levelname)s: %(message)s", force=True)


def _load_inputs(cfg: RunConfig) -> RegionInputs:
    mask = load_mask(cfg.mask, cfg.cropland_codes, cfg.water_codes)
    if cfg.ndvi.suffix.lower() == ".csv":
        meta = geobox_to_grid(cfg.aoi, cfg.pixel_size)
        if meta != mask.meta:
            raise ValueError(f"mask grid {mask.meta} does not match the composited grid {meta}")
        ndvi = composite_csv(cfg.ndvi, meta)
    else:
        ndvi = read_stack(cfg.ndvi)

    def stacks(paths, what):
        found = []
        for p in paths:
            if p.is_file():
                found.append(read_stack(p))
            else:
                log.warning("%s file %s not found; tiles it covered will fail", what, p)
        return found

    return RegionInputs(ndvi, mask, stacks(cfg.precip, "precipitation"),
                        stacks(cfg.temp, "temperature"))


def _write_png(grid, path):
    from PIL import Image

    rgb = np.zeros((*grid.meta.shape, 3), dtype=np.uint8)
    for code, colour in PALETTE.items():
        rgb[grid.values == code] = colour
    buf = io.BytesIO()
    Image.fromarray(rgb, mode="RGB").save(buf, format="PNG")
    atomic_write(path, buf.getvalue())


def _emit(text: str, path: Path | None):
    if path is None:
        sys.stdout.write(text)
    else:
        atomic_write(path, text)


def _json(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False, default=_jsonable) + "\n"


def _jsonable(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    raise TypeError(f"not JSON serialisable: {type(o)}")


def run_predict(cfg: RunConfig) -> int:
    inputs = _load_inputs(cfg)
    pred = predict_region(cfg.aoi, inputs, cfg.heuristic, cfg.seed, cfg.workers, cfg.k_range)
    write_raster(pred.grid, cfg.out)
    lines = "".join(json.dumps(rec, sort_keys=True, default=_jsonable) + "\n"
                    for rec in pred.provenance)
    _emit(lines, cfg.provenance)
    if cfg.png is not None:
        _write_png(pred.grid, cfg.png)
    if pred.failed:
        log.error("%d of %d tiles failed", len(pred.failed), len(pred.provenance))
        return 1
    return 0


def run_consistency(cfg: RunConfig) -> int:
    report = consistency_check(cfg.aoi, _load_inputs(cfg), cfg.heuristic, cfg.seed,
                               cfg.k_range, cfg.workers)
    _emit(_json(report.as_dict()), cfg.out)
    return 0


def run_evaluate(cfg: RunConfig) -> int:
    from .raster import read_raster

    report = evaluate_points(read_raster(cfg.raster), load_points(cfg.points))
    if report.accuracy is None:
        log.warning("no scorable points; accuracy undefined")
    _emit(_json(report.as_dict()), cfg.out)
    return 0


def run_synth(cfg: RunConfig) -> int:
    scene = load_scene(cfg.spec).with_(seed=cfg.seed)
    synth_generate(scene, cfg.heuristic).save(cfg.out_dir)
    return 0


def read_points_csv(path) -> np.ndarray:
    """Rows of 12 numbers; a non-numeric first row is taken as a header."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if rows:
        try:
            [float(x) for x in rows[0]]
        except ValueError:
            rows = rows[1:]
    pts = np.array([[float(x) for x in r] for r in rows], dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 12:
        raise ValueError(f"{path}: expected 12 columns per row, got shape {pts.shape}")
    return pts


def run_metrics(cfg: RunConfig) -> int:
    pts = read_points_csv(cfg.points)
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["k", "inertia", "silhouette", "calinski_harabasz", "davies_bouldin"])
    for k in range(cfg.k_range[0], cfg.k_range[1] + 1):
        if k >= len(pts):
            log.warning("k=%d needs more than %d points; stopping", k, len(pts))
            break
        m = fit_best(pts, k, cfg.seed)
        try:
            s = KScore(k, m.inertia, silhouette(pts, m), calinski_harabasz(pts, m),
                       davies_bouldin(pts, m))
            w.writerow([k, repr(s.inertia), repr(s.silhouette), repr(s.calinski_harabasz),
                        repr(s.davies_bouldin)])
        except (UndefinedMetricError, InvalidModelError) as exc:
            log.warning("k=%d: %s", k, exc)
            w.writerow([k, repr(m.inertia), "", "", ""])
    sys.stdout.write(out.getvalue())
    return 0


def run_info(cfg: RunConfig) -> int:
    status = 0
    for path in cfg.paths:
        try:
            sys.stdout.write(json.dumps({"path": str(path), **read_header(path)}) + "\n")
        except ValueError as exc:
            print(f"irrigrid: {path}: {exc}", file=sys.stderr)
            status = 1
    return status


COMMANDS = {"predict": run_predict, "consistency": run_consistency, "evaluate": run_evaluate,
            "synth": run_synth, "metrics": run_metrics, "info": run_info}


def run(cfg: RunConfig) -> int:
    _setup_logging(cfg.log_level)
    try:
        return COMMANDS[cfg.command](cfg)
    except (ValueError, OSError) as exc:
        print(f"irrigrid {cfg.command}: error: {exc}", file=sys.stderr)
        log.debug("traceback", exc_info=True)
        return 1


def main(argv=None) -> int:
    try:
        cfg = parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
