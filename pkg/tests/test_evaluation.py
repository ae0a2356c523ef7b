import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from irrigrid.evaluation import (
    SHIFTS,
    EvalPoint,
    consistency_check,
    evaluate_points,
    load_points,
    shift_agreement,
    shift_offsets,
)
from irrigrid.pipeline import IRRIGATED, NODATA, NON_CROPLAND, NOT_CULTIVATED, RAINFED
from irrigrid.raster import BandKind, GeoBox, GridMeta, RasterGrid
from irrigrid.synth import synth_generate

from .conftest import quad_scene

META = GridMeta(0.0, 5.0, 1.0, 5, 5)


def label_grid(codes, meta=META):
    return RasterGrid(meta, BandKind.LABEL, np.asarray(codes, dtype=float))


def center_points(grid, truths):
    """One point at each pixel center (row-major) with the given truth strings."""
    lon, lat = grid.meta.pixel_centers()
    pts = []
    for i, t in enumerate(truths):
        r, c = divmod(i, grid.meta.width)
        pts.append(EvalPoint(float(lon[c]), float(lat[r]), t))
    return pts


class TestAccuracy:
    def test_23_of_25(self):
        grid = label_grid(np.full((5, 5), IRRIGATED))
        truths = ["irrigated"] * 23 + ["rainfed"] * 2
        rep = evaluate_points(grid, center_points(grid, truths))
        assert (rep.n_scored, rep.n_correct) == (25, 23)
        assert rep.accuracy == 0.92
        assert rep.confusion["rainfed"]["irrigated"] == 2

    def test_7_of_10(self):
        codes = np.full((5, 5), NON_CROPLAND)
        codes.ravel()[:10] = [RAINFED] * 5 + [IRRIGATED] * 5
        grid = label_grid(codes)
        truths = ["rainfed"] * 4 + ["irrigated"] + ["irrigated"] * 3 + ["rainfed"] * 2
        rep = evaluate_points(grid, center_points(grid, truths + ["rainfed"] * 15))
        assert (rep.n_scored, rep.n_correct, rep.n_unscorable) == (10, 7, 15)
        assert rep.accuracy == 0.7

    def test_all_nodata(self):
        grid = label_grid(np.full((5, 5), NODATA))
        rep = evaluate_points(grid, center_points(grid, ["irrigated"] * 25))
        assert rep.n_scored == 0 and rep.accuracy is None and rep.n_unscorable == 25
        assert rep.as_dict()["accuracy"] is None

    def test_not_cultivated_counts_as_rainfed(self):
        grid = label_grid(np.full((5, 5), NOT_CULTIVATED))
        rep = evaluate_points(grid, center_points(grid, ["rainfed"]))
        assert rep.accuracy == 1.0

    def test_outside_raster(self):
        rep = evaluate_points(label_grid(np.zeros((5, 5))), [EvalPoint(7.0, 2.0, "rainfed")])
        assert rep.n_unscorable == 1 and rep.outcomes[0]["reason"] == "outside raster"

    def test_bad_label(self):
        with pytest.raises(ValueError):
            EvalPoint(0, 0, "flooded")

    def test_load_points(self, tmp_path):
        p = tmp_path / "pts.csv"
        p.write_text("lon,lat,label\n0.5,4.5,Irrigated\n1.5,4.5,rainfed\n")
        pts = load_points(p)
        assert pts == [EvalPoint(0.5, 4.5, "irrigated"), EvalPoint(1.5, 4.5, "rainfed")]

    @settings(max_examples=50)
    @given(st.lists(st.sampled_from([RAINFED, IRRIGATED, NOT_CULTIVATED, NON_CROPLAND, NODATA]),
                    min_size=25, max_size=25),
           st.lists(st.sampled_from(["irrigated", "rainfed"]), min_size=25, max_size=25),
           st.randoms())
    def test_order_invariant(self, codes, truths, rnd):
        grid = label_grid(np.reshape(codes, (5, 5)))
        pts = center_points(grid, truths)
        shuffled = pts[:]
        rnd.shuffle(shuffled)
        a, b = evaluate_points(grid, pts), evaluate_points(grid, shuffled)
        assert (a.accuracy, a.n_scored, a.confusion) == (b.accuracy, b.n_scored, b.confusion)


class TestShiftAgreement:
    def test_self(self):
        codes = np.random.default_rng(0).choice([0, 1, 2, 3], size=(5, 5))
        codes[0, 0] = IRRIGATED
        g = label_grid(codes)
        a, n = shift_agreement(g, g)
        assert a == n > 0

    def test_no_cropland(self):
        g = label_grid(np.full((5, 5), NON_CROPLAND))
        assert shift_agreement(g, g) == (0, 0)

    def test_offset_overlap(self):
        a = label_grid(np.full((5, 5), IRRIGATED))
        codes = np.full((5, 5), RAINFED)
        codes[:, :3] = IRRIGATED
        # b starts 2 columns east: b's first 3 columns overlap a's columns 2..4
        b = label_grid(codes, GridMeta(2.0, 5.0, 1.0, 5, 5))
        assert shift_agreement(a, b) == (15, 15)

    def test_disjoint(self):
        a = label_grid(np.zeros((5, 5)))
        b = label_grid(np.zeros((5, 5)), GridMeta(10.0, 5.0, 1.0, 5, 5))
        assert shift_agreement(a, b) == (0, 0)


class TestConsistency:
    aoi = GeoBox(0.25, 0.25, 0.75, 0.75)

    def test_shift_offsets_round_to_pixels(self):
        assert shift_offsets(self.aoi, 0.025) == (7, 7)
        assert shift_offsets(GeoBox(0, 0, 0.3, 0.3), 0.01) == (10, 10)

    def test_eight_shifts(self):
        assert len(set(SHIFTS)) == 8 and (0, 0) not in SHIFTS

    def test_noise_free_is_perfect(self, quad):
        rep = consistency_check(self.aoi, quad.inputs, seed=1)
        assert rep.overall == 1.0
        assert len(rep.shifts) == 8 and all(s["agreement"] == 1.0 for s in rep.shifts)
        # shifted pixel centers land on the same lattice
        ps = quad.ndvi.meta.pixel_size
        for s in rep.shifts:
            moved = self.aoi.translated(s["dx_pixels"] * ps, s["dy_pixels"] * ps)
            assert abs((moved.lon_min - self.aoi.lon_min) / ps - s["dx_pixels"]) < 1e-9

    def test_overall_is_pooled(self):
        out = synth_generate(quad_scene(noise_sigma=0.15, seed=3))
        rep = consistency_check(self.aoi, out.inputs, seed=4)
        assert rep.compared == sum(s["compared"] for s in rep.shifts)
        assert rep.overall == pytest.approx(
            sum(s["agreement"] * s["compared"] for s in rep.shifts) / rep.compared)
        assert 0.0 <= rep.overall <= 1.0

    def test_missing_margin(self, quad):
        with pytest.raises(ValueError, match="margin"):
            consistency_check(GeoBox(0.0, 0.0, 0.5, 0.5), quad.inputs)
