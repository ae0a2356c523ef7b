import numpy as np
import pytest

from irrigrid.ingest import CroplandMask
from irrigrid.pipeline import (
    IRRIGATED,
    NON_CROPLAND,
    NOT_CULTIVATED,
    RAINFED,
    RegionInputs,
    TileSpec,
    pixel_window,
    predict_region,
    predict_tile,
    tile_aoi,
    tile_seed,
)
from irrigrid.raster import BandKind, GeoBox, MonthlyStack, RasterGrid, geobox_to_grid
from irrigrid.synth import synth_generate, two_population_scene

from .conftest import quad_scene

UNIT = GeoBox(0.0, 0.0, 1.0, 1.0)
TILE = GeoBox(0.0, 0.0, 0.5, 0.5)


class TestTiling:
    def test_exact_division(self):
        tiles = tile_aoi(UNIT)
        assert len(tiles) == 4
        assert [(t.row, t.col) for t in tiles] == [(0, 0), (0, 1), (1, 0), (1, 1)]
        assert tiles[0].geobox == GeoBox(0.0, 0.5, 0.5, 1.0)
        assert all(t.geobox.width == 0.5 and t.geobox.height == 0.5 for t in tiles)

    def test_clipped(self):
        tiles = tile_aoi(GeoBox(0.0, 0.0, 0.7, 0.5))
        assert len(tiles) == 2
        assert tiles[1].geobox.width == pytest.approx(0.2)
        assert tiles[1].geobox.lon_max == 0.7

    def test_smaller_than_edge(self):
        tiles = tile_aoi(GeoBox(0.0, 0.0, 0.3, 0.3))
        assert len(tiles) == 1 and tiles[0].geobox == GeoBox(0.0, 0.0, 0.3, 0.3)

    def test_tile_edge_limit(self):
        with pytest.raises(ValueError):
            TileSpec(GeoBox(0, 0, 0.6, 0.5))

    def test_windows_partition_region(self):
        meta = geobox_to_grid(GeoBox(0.0, 0.0, 1.3, 0.9), 0.01)
        cover = np.zeros(meta.shape, dtype=int)
        for t in tile_aoi(meta.geobox):
            r0, c0, h, w = pixel_window(meta, t.geobox)
            cover[r0:r0 + h, c0:c0 + w] += 1
        assert (cover == 1).all()

    def test_tile_seed_depends_on_indices(self):
        seeds = {tile_seed(42, r, c) for r in range(3) for c in range(3)}
        assert len(seeds) == 9
        assert tile_seed(42, 1, 2) == tile_seed(42, 1, 2)


def _tile_args(out):
    return out.ndvi, out.mask, out.precip, out.temp


class TestPredictTile:
    def test_no_cropland(self, small_tile):
        meta = small_tile.ndvi.meta
        mask = CroplandMask(RasterGrid(meta, BandKind.MASK, np.where(
            np.arange(meta.width)[None, :] < 5, 0, 1) * np.ones(meta.shape)))
        pred = predict_tile(TileSpec(TILE), small_tile.ndvi, mask, small_tile.precip,
                            small_tile.temp)
        assert set(np.unique(pred.grid.values)) == {NON_CROPLAND}
        assert pred.provenance[0]["warnings"]

    def test_mask_nodata_stays_nodata(self, small_tile):
        meta = small_tile.ndvi.meta
        codes = np.full(meta.shape, 255.0)
        codes[0, 0] = 1
        pred = predict_tile(TileSpec(TILE), small_tile.ndvi,
                            CroplandMask(RasterGrid(meta, BandKind.MASK, codes)),
                            small_tile.precip, small_tile.temp)
        assert pred.grid.values[0, 0] == NON_CROPLAND
        assert (pred.grid.values.ravel()[1:] == 255).all()

    def test_two_populations(self, small_tile):
        pred = predict_tile(TileSpec(TILE), *_tile_args(small_tile), seed=1)
        np.testing.assert_array_equal(pred.grid.values, small_tile.truth.values)
        rep = pred.provenance[0]
        assert rep["k"] == 2 and len(rep["clusters"]) == 2
        verdicts = sorted(c["overall"] for c in rep["clusters"])
        assert verdicts == ["IRRIGATED", "RAINFED"]

    def test_small_tile_fallback(self, small_tile):
        meta = small_tile.ndvi.meta
        codes = np.ones(meta.shape)
        codes[0, :3] = 2     # irrigated half
        codes[0, -3:] = 2    # rainfed half
        mask = CroplandMask(RasterGrid(meta, BandKind.MASK, codes))
        pred = predict_tile(TileSpec(TILE), small_tile.ndvi, mask, small_tile.precip,
                            small_tile.temp)
        assert pred.provenance[0]["k"] is None
        np.testing.assert_array_equal(pred.grid.values[0, :3], IRRIGATED)
        np.testing.assert_array_equal(pred.grid.values[0, -3:], RAINFED)

    def test_identical_signatures_use_one_cluster(self):
        out = synth_generate(two_population_scene(pixel_size=0.025).with_(
            regions=two_population_scene().regions[:1] + (
                two_population_scene().regions[1].__class__(
                    GeoBox(0.25, 0.0, 0.5, 0.5), peak_month=3, amplitude=0.6, irrigated=True),)))
        pred = predict_tile(TileSpec(TILE), *_tile_args(out))
        assert pred.provenance[0]["k"] == 1
        assert (pred.grid.values == IRRIGATED).all()

    def test_incomplete_cropland_pixels(self, small_tile):
        arr = small_tile.ndvi.array.copy()
        arr[:, 0, 0] = np.nan
        ndvi = MonthlyStack.from_array(small_tile.ndvi.meta, BandKind.NDVI, arr)
        pred = predict_tile(TileSpec(TILE), ndvi, small_tile.mask, small_tile.precip,
                            small_tile.temp)
        assert pred.grid.values[0, 0] == 255
        assert any("incomplete" in w for w in pred.provenance[0]["warnings"])


class TestPredictRegion:
    def test_single_tile_matches_predict_tile(self, small_tile):
        region = predict_region(TILE, small_tile.inputs, seed=7)
        tile = predict_tile(TileSpec(TILE), *_tile_args(small_tile), seed=tile_seed(7, 0, 0))
        assert region.grid.identical(tile.grid)

    def test_quad_recovers_truth(self, quad):
        pred = predict_region(UNIT, quad.inputs, seed=3)
        np.testing.assert_array_equal(pred.grid.values, quad.truth.values)
        assert [(p["tile_row"], p["tile_col"]) for p in pred.provenance] == \
            [(0, 0), (0, 1), (1, 0), (1, 1)]

    def test_workers_bit_identical(self):
        out = synth_generate(quad_scene(noise_sigma=0.05, seed=4))
        one = predict_region(UNIT, out.inputs, seed=11, workers=1)
        many = predict_region(UNIT, out.inputs, seed=11, workers=8)
        again = predict_region(UNIT, out.inputs, seed=11, workers=1)
        assert one.grid.identical(many.grid) and one.grid.identical(again.grid)
        assert one.provenance == many.provenance

    def test_partial_failure(self, quad):
        # one climate stack per tile; drop the one for tile (1, 1)
        stacks = []
        for t in tile_aoi(UNIT):
            r0, c0, h, w = pixel_window(quad.precip.meta, t.geobox)
            stacks.append((quad.precip.window(r0, c0, h, w), quad.temp.window(r0, c0, h, w)))
        inputs = RegionInputs(quad.ndvi, quad.mask, [p for p, _ in stacks[:3]],
                              [t for _, t in stacks[:3]])
        pred = predict_region(UNIT, inputs, seed=3)
        assert [(f["tile_row"], f["tile_col"]) for f in pred.failed] == [(1, 1)]
        r0, c0, h, w = pixel_window(pred.grid.meta, tile_aoi(UNIT)[3].geobox)
        assert (pred.grid.values[r0:r0 + h, c0:c0 + w] == 255).all()
        ok = np.ones(pred.grid.meta.shape, bool)
        ok[r0:r0 + h, c0:c0 + w] = False
        np.testing.assert_array_equal(pred.grid.values[ok], quad.truth.values[ok])

    def test_tile_independence(self, quad):
        tile = tile_aoi(UNIT)[1]
        r0, c0, h, w = pixel_window(quad.ndvi.meta, tile.geobox)
        arr = np.full(quad.ndvi.array.shape, np.nan, dtype=np.float32)
        arr[:, r0:r0 + h, c0:c0 + w] = quad.ndvi.array[:, r0:r0 + h, c0:c0 + w]
        blanked = RegionInputs(MonthlyStack.from_array(quad.ndvi.meta, BandKind.NDVI, arr),
                               quad.mask, quad.inputs.precip, quad.inputs.temp)
        full = predict_region(UNIT, quad.inputs, seed=5)
        part = predict_region(UNIT, blanked, seed=5)
        np.testing.assert_array_equal(full.grid.values[r0:r0 + h, c0:c0 + w],
                                      part.grid.values[r0:r0 + h, c0:c0 + w])

    def test_label_code_invariants(self):
        out = synth_generate(quad_scene(noise_sigma=0.1, seed=9))
        pred = predict_region(UNIT, out.inputs, seed=2)
        crop = out.mask.cropland
        assert set(np.unique(pred.grid.values[crop])) <= {RAINFED, IRRIGATED, NOT_CULTIVATED}
        assert set(np.unique(pred.grid.values[~crop])) <= {NON_CROPLAND, 255}

    def test_seed_sensitivity(self):
        out = synth_generate(two_population_scene(pixel_size=0.01, noise_sigma=0.05, seed=8))
        preds = [predict_region(TILE, out.inputs, seed=s).grid.values for s in range(5)]
        for p in preds[1:]:
            assert (p == preds[0]).mean() >= 0.99

    def test_sub_region_aoi(self, quad):
        # an aoi inside the input grid is cut from the same lattice
        aoi = GeoBox(0.25, 0.25, 0.75, 0.75)
        pred = predict_region(aoi, quad.inputs, seed=1)
        assert pred.grid.meta.shape == (20, 20)
        r0, c0 = quad.ndvi.meta.offset_of(pred.grid.meta)
        np.testing.assert_array_equal(pred.grid.values,
                                      quad.truth.values[r0:r0 + 20, c0:c0 + 20])

    def test_workers_must_be_positive(self, quad):
        with pytest.raises(ValueError):
            predict_region(UNIT, quad.inputs, workers=0)
