from __future__ import annotations

import numpy as np
import pytest

from reliefseg.grid import AsciiGridError, BinaryMask, DtmGrid, dump_ascii_grid, load_ascii_grid

from .conftest import make_grid

SIMPLE_ASC = """\
ncols 2
nrows 2
xllcorner 10.0
yllcorner 20.0
cellsize 0.5
nodata_value -9999
1 2
3 4
"""


class TestLoadAsciiGrid:
    def test_simple_parse_rows_north_first(self):
        grid = load_ascii_grid(SIMPLE_ASC)
        assert (grid.width, grid.height) == (2, 2)
        assert grid.cell_size == 0.5
        # first body row is the north row
        assert grid.elevations[0].tolist() == [1.0, 2.0]
        assert grid.elevations[1].tolist() == [3.0, 4.0]
        # lower-left corner converted to north-west corner
        assert grid.origin_x == 10.0
        assert grid.origin_y == 20.0 + 2 * 0.5

    def test_nodata_cell_flagged(self):
        text = SIMPLE_ASC.replace("3 4", "-9999 4")
        grid = load_ascii_grid(text)
        assert grid.nodata[1, 0]
        assert not grid.nodata.any() or grid.nodata.sum() == 1

    def test_missing_header_key_named(self):
        text = "\n".join(l for l in SIMPLE_ASC.splitlines() if not l.startswith("cellsize"))
        with pytest.raises(AsciiGridError, match="cellsize"):
            load_ascii_grid(text)

    def test_duplicate_header_key(self):
        text = "ncols 2\n" + SIMPLE_ASC
        with pytest.raises(AsciiGridError, match="duplicate"):
            load_ascii_grid(text)

    def test_value_count_mismatch(self):
        text = SIMPLE_ASC.replace("3 4", "3")
        with pytest.raises(AsciiGridError, match="expected 4"):
            load_ascii_grid(text)

    def test_non_numeric_token(self):
        text = SIMPLE_ASC.replace("4", "x")
        with pytest.raises(AsciiGridError, match="non-numeric"):
            load_ascii_grid(text)

    def test_center_origin_rejected(self):
        text = SIMPLE_ASC.replace("xllcorner", "xllcenter")
        with pytest.raises(AsciiGridError, match="xllcenter"):
            load_ascii_grid(text)


class TestAsciiRoundTrip:
    def test_round_trip_preserves_values_and_nodata(self, rng):
        z = rng.normal(50.0, 10.0, size=(7, 5))
        mask = rng.random((7, 5)) < 0.2
        grid = make_grid(z, cell_size=0.5, origin_x=123.25, nodata=mask)
        back = load_ascii_grid(dump_ascii_grid(grid))
        assert np.array_equal(back.nodata, grid.nodata)
        valid = ~grid.nodata
        assert np.array_equal(back.elevations[valid], grid.elevations[valid])
        assert back.origin_x == grid.origin_x
        assert back.origin_y == grid.origin_y
        assert back.cell_size == grid.cell_size


class TestWorldPixel:
    def test_origin_maps_to_zero(self):
        grid = make_grid(np.zeros((4, 4)), cell_size=0.5, origin_x=1000.0, origin_y=2000.0)
        assert grid.world_to_pixel(1000.0, 2000.0) == (0.0, 0.0)

    def test_east_is_positive_col(self):
        grid = make_grid(np.zeros((4, 4)), cell_size=0.5, origin_x=1000.0, origin_y=2000.0)
        assert grid.world_to_pixel(1000.5, 2000.0) == (1.0, 0.0)

    def test_south_is_positive_row(self):
        grid = make_grid(np.zeros((4, 4)), cell_size=0.5, origin_x=1000.0, origin_y=2000.0)
        assert grid.world_to_pixel(1000.0, 1999.5) == (0.0, 1.0)

    def test_round_trip_identity_on_random_points(self, rng):
        grid = make_grid(np.zeros((8, 8)), cell_size=0.5, origin_x=312.5, origin_y=7201.0)
        pts = rng.uniform(-500, 500, size=(1000, 2)) + [312.5, 7201.0]
        for x, y in pts:
            col, row = grid.world_to_pixel(x, y)
            xb, yb = grid.pixel_to_world(col, row)
            assert abs(xb - x) < 1e-9
            assert abs(yb - y) < 1e-9


class TestTypes:
    def test_grid_shape_validation(self):
        with pytest.raises(ValueError, match="shape"):
            DtmGrid(
                width=3,
                height=2,
                cell_size=0.5,
                origin_x=0,
                origin_y=0,
                elevations=np.zeros((3, 3)),
                nodata=np.zeros((3, 3), dtype=bool),
            )

    def test_grid_arrays_frozen(self):
        grid = make_grid(np.zeros((2, 2)))
        with pytest.raises(ValueError):
            grid.elevations[0, 0] = 5.0

    def test_mask_from_array(self):
        m = BinaryMask.from_array(np.eye(3, dtype=bool))
        assert (m.width, m.height) == (3, 3)
        assert m.positive_count() == 3

    def test_mask_dims_positive(self):
        with pytest.raises(ValueError, match="positive"):
            BinaryMask(width=0, height=3, pixels=np.zeros((3, 0), dtype=bool))
