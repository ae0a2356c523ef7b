import json

import numpy as np
import pytest

from irrigrid.pipeline import IRRIGATED, NON_CROPLAND, NOT_CULTIVATED, RAINFED, predict_region
from irrigrid.raster import GeoBox, read_raster, read_stack
from irrigrid.synth import (
    SynthRegion,
    SynthScene,
    load_scene,
    ndvi_curve,
    synth_generate,
    two_population_scene,
)

BOX = GeoBox(0.0, 0.0, 0.5, 0.5)


def test_curve_peaks_at_month():
    c = ndvi_curve(3, 0.6, 0.15, 1.0)
    assert c.argmax() == 2 and c[2] == pytest.approx(0.6)
    # circular: a December peak leaks into January, not June
    d = ndvi_curve(12, 0.6, 0.15, 1.0)
    assert d[0] == d[10] and d[0] > d[5]


def test_deterministic():
    scene = two_population_scene(pixel_size=0.025, noise_sigma=0.05, seed=3)
    a, b = synth_generate(scene), synth_generate(scene)
    assert a.ndvi.identical(b.ndvi) and a.truth.identical(b.truth)
    c = synth_generate(scene.with_(seed=4))
    assert not a.ndvi.identical(c.ndvi)


def test_truth_layout():
    out = synth_generate(two_population_scene(pixel_size=0.025))
    assert (out.truth.values[:, :10] == IRRIGATED).all()
    assert (out.truth.values[:, 10:] == RAINFED).all()


def test_overlap_rejected():
    scene = SynthScene(BOX, 0.05, (SynthRegion(BOX), SynthRegion(GeoBox(0.2, 0.2, 0.5, 0.5))))
    with pytest.raises(ValueError, match="overlap"):
        synth_generate(scene)


def test_gap_rejected():
    scene = SynthScene(BOX, 0.05, (SynthRegion(GeoBox(0.0, 0.0, 0.25, 0.5)),))
    with pytest.raises(ValueError, match="not covered"):
        synth_generate(scene)


def test_contradictory_climate():
    wet = SynthRegion(BOX, peak_month=5, irrigated=True, precip_mm=[150.0] * 12)
    with pytest.raises(ValueError, match="contradicts"):
        synth_generate(SynthScene(BOX, 0.05, (wet,)))


def test_sub_threshold_amplitude_not_cultivated():
    scene = two_population_scene(pixel_size=0.025, amplitude=0.25)
    out = synth_generate(scene)
    assert (out.truth.values == NOT_CULTIVATED).all()
    pred = predict_region(BOX, out.inputs, seed=0)
    assert (pred.grid.values == NOT_CULTIVATED).all()


def test_non_cropland_and_water():
    scene = SynthScene(BOX, 0.05, (
        SynthRegion(GeoBox(0.0, 0.0, 0.5, 0.25), land="water"),
        SynthRegion(GeoBox(0.0, 0.25, 0.5, 0.5), land="non_cropland"),
    ))
    out = synth_generate(scene)
    assert (out.truth.values == NON_CROPLAND).all()
    assert not out.mask.cropland.any()


def test_json_round_trip(tmp_path):
    scene = two_population_scene(pixel_size=0.05, noise_sigma=0.02, seed=9)
    scene = scene.with_(regions=scene.regions[:1] + (SynthRegion(
        scene.regions[1].bounds, peak_month=8, irrigated=False,
        precip_mm=[10.0] * 6 + [200.0, 200.0] + [10.0] * 4, temp_c=[12.0] * 12),))
    path = tmp_path / "scene.json"
    path.write_text(json.dumps(scene.to_dict()))
    assert load_scene(path) == scene


def test_save(tmp_path):
    out = synth_generate(two_population_scene(pixel_size=0.05))
    paths = out.save(tmp_path)
    assert read_stack(paths["ndvi"]).identical(out.ndvi)
    assert read_raster(paths["truth"]).identical(out.truth)
    assert load_scene(paths["scene"]) == out.scene


def test_noise_clipped():
    out = synth_generate(two_population_scene(pixel_size=0.025, noise_sigma=2.0))
    assert np.nanmax(out.ndvi.array) <= 1 and np.nanmin(out.ndvi.array) >= -1
