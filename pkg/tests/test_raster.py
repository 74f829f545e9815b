import numpy as np
import pytest

from helpers import bilinear_at
from soilmap.geo import GeoTransform
from soilmap.raster import (
    RasterFormatError,
    StackFile,
    crop_tile,
    load_stack,
    save_stack,
    stack_from_bands,
    upsample_band,
)


def _transform(px=10.0, h=4):
    return GeoTransform(origin_x=0.0, origin_y=h * px, pixel_w=px, pixel_h=-px)


class TestGeoTransform:
    def test_round_trip(self):
        t = _transform()
        x, y = t.pixel_to_planar(3.25, 1.5)
        assert t.planar_to_pixel(x, y) == pytest.approx((3.25, 1.5))

    def test_center_convention(self):
        t = _transform(px=10.0, h=4)
        assert t.pixel_center(0, 0) == pytest.approx((5.0, 35.0))
        assert t.containing_pixel(5.0, 35.0) == (0, 0)
        assert t.containing_pixel(19.99, 0.01) == (1, 3)

    def test_invalid(self):
        with pytest.raises(ValueError):
            GeoTransform(0, 0, -1.0, -1.0)
        with pytest.raises(ValueError):
            GeoTransform(0, 0, 1.0, 0.0)


class TestContainer:
    def test_round_trip_identity(self, tmp_path):
        grids = [np.arange(16, dtype=np.float32).reshape(4, 4),
                 np.linspace(-3, 9, 16, dtype=np.float32).reshape(4, 4)]
        stack = stack_from_bands(
            [("a", "satellite", grids[0]), ("b", "covariate", grids[1])], _transform())
        path = tmp_path / "two_band.rast"
        save_stack(stack, path)
        back = load_stack(path)
        assert back.band_names == ["a", "b"]
        assert back.bands[1].group == "covariate"
        np.testing.assert_array_equal(back.data, stack.data)
        assert back.transform == stack.transform

    def test_band_shape_mismatch(self):
        with pytest.raises(RasterFormatError, match="shape mismatch"):
            stack_from_bands(
                [("a", "satellite", np.zeros((4, 4))),
                 ("b", "satellite", np.zeros((4, 5)))], _transform())

    def test_unknown_dtype_and_malformed_header(self, tmp_path):
        path = tmp_path / "bad.rast"
        good = stack_from_bands([("a", "satellite", np.zeros((2, 2), np.float32))],
                                _transform(h=2))
        save_stack(good, path)
        text = path.read_bytes().replace(b"float32", b"float16")
        path.write_bytes(text)
        with pytest.raises(RasterFormatError, match="dtype"):
            load_stack(path)

        path.write_bytes(b"width 2\nno colon here\n\n")
        with pytest.raises(RasterFormatError):
            load_stack(path)

    def test_payload_size_checked(self, tmp_path):
        path = tmp_path / "trunc.rast"
        good = stack_from_bands([("a", "satellite", np.zeros((3, 3), np.float32))],
                                _transform(h=3))
        save_stack(good, path)
        path.write_bytes(path.read_bytes()[:-4])
        with pytest.raises(RasterFormatError, match="payload"):
            load_stack(path)

    def test_large_round_trip_bit_exact(self, tmp_path, rng):
        data = rng.standard_normal((1, 1000, 1000)).astype(np.float32)
        stack = stack_from_bands([("z", "covariate", data[0])], _transform(h=1000))
        path = tmp_path / "big.rast"
        save_stack(stack, path)
        np.testing.assert_array_equal(load_stack(path).data, stack.data)

    def test_windowed_reader_matches_full_load(self, tmp_path, rng):
        data = rng.standard_normal((2, 32, 48)).astype(np.float32)
        stack = stack_from_bands(
            [("a", "satellite", data[0]), ("b", "covariate", data[1])],
            _transform(h=32))
        path = tmp_path / "win.rast"
        save_stack(stack, path)
        reader = StackFile(path)
        window = reader.read_window(1, 5, 7, 10, 20)
        np.testing.assert_array_equal(window, data[1, 5:15, 7:27])
        with pytest.raises(IndexError):
            reader.read_window(0, 30, 0, 10, 10)


class TestCropTile:
    @pytest.fixture()
    def stack(self, rng):
        data = rng.standard_normal((3, 40, 40)).astype(np.float32)
        return stack_from_bands(
            [(f"b{i}", "covariate", data[i]) for i in range(3)], _transform(h=40))

    def test_center_pixel(self, stack):
        center = stack.transform.pixel_center(20, 20)
        tile = crop_tile(stack, center, 8)
        assert tile.pixels.shape == (3, 8, 8)
        np.testing.assert_array_equal(tile.pixels[:, 4, 4], stack.data[:, 20, 20])

    def test_edge_replication(self, stack):
        center = stack.transform.pixel_center(0, 20)
        tile = crop_tile(stack, center, 8)
        # window columns -4..3 clamp to column 0 on the left
        for c in range(4):
            np.testing.assert_array_equal(tile.pixels[:, :, c], tile.pixels[:, :, 4])

    def test_against_index_arithmetic_oracle(self, stack, rng):
        size = 6
        for _ in range(100):
            col = int(rng.integers(0, 40))
            row = int(rng.integers(0, 40))
            tile = crop_tile(stack, stack.transform.pixel_center(col, row), size)
            expect = np.empty((3, size, size), dtype=np.float32)
            for rr in range(size):
                for cc in range(size):
                    src_r = min(max(row - size // 2 + rr, 0), 39)
                    src_c = min(max(col - size // 2 + cc, 0), 39)
                    expect[:, rr, cc] = stack.data[:, src_r, src_c]
            np.testing.assert_array_equal(tile.pixels, expect)

    def test_translation_consistency(self, stack):
        t1 = crop_tile(stack, stack.transform.pixel_center(15, 15), 10)
        t2 = crop_tile(stack, stack.transform.pixel_center(18, 15), 10)
        np.testing.assert_array_equal(t1.pixels[:, :, 3:], t2.pixels[:, :, :7])

    def test_nodata_imputed_and_flagged(self, stack):
        stack.data[1, 10, 10] = stack.nodata
        tile = crop_tile(stack, stack.transform.pixel_center(10, 10), 4)
        assert not tile.valid[1, 2, 2]
        assert tile.valid[0, 2, 2]
        mean = stack.band_means()[1]
        assert tile.pixels[1, 2, 2] == pytest.approx(mean, rel=1e-6)
        stack.data[1, 10, 10] = 0.0

    def test_outside_extent(self, stack):
        with pytest.raises(ValueError, match="outside"):
            crop_tile(stack, (-1000.0, -1000.0), 8)


class TestUpsampleBand:
    def test_constant_preserved(self):
        out = upsample_band(np.full((4, 4), 5.0), 800.0, 10.0)
        assert out.shape == (320, 320)
        np.testing.assert_allclose(out, 5.0)

    def test_linear_ramp_interior(self):
        ramp = np.arange(8, dtype=np.float64)[None, :].repeat(8, axis=0)
        out = upsample_band(ramp, 80.0, 10.0)
        # interior output centers interpolate the ramp exactly
        cols = np.arange(64)
        expected = np.clip((cols + 0.5) / 8.0 - 0.5, 0, 7)
        np.testing.assert_allclose(out[32], expected, atol=1e-6)
        interior = slice(8, 56)
        np.testing.assert_allclose(out[8, interior],
                                   (cols[interior] + 0.5) / 8.0 - 0.5, atol=1e-6)

    def test_against_direct_formula_oracle(self, rng):
        grid = rng.standard_normal((8, 8))
        out = upsample_band(grid, 40.0, 10.0)
        h, w = grid.shape
        for _ in range(50):
            r = int(rng.integers(0, out.shape[0]))
            c = int(rng.integers(0, out.shape[1]))
            # express output center in [-1, 1] tile coords of the source grid
            u = (2 * (c + 0.5) / out.shape[1]) - 1
            v = (2 * (r + 0.5) / out.shape[0]) - 1
            assert out[r, c] == pytest.approx(bilinear_at(grid, u, v), abs=1e-6)

    def test_bad_resolution(self):
        with pytest.raises(ValueError):
            upsample_band(np.zeros((2, 2)), -1.0, 10.0)
