from __future__ import annotations

import numpy as np
import pytest

from reliefseg.grid import DtmGrid


def make_grid(
    elevations,
    cell_size: float = 0.5,
    origin_x: float = 0.0,
    origin_y: float | None = None,
    nodata=None,
) -> DtmGrid:
    z = np.asarray(elevations, dtype=np.float64)
    h, w = z.shape
    if origin_y is None:
        origin_y = h * cell_size
    mask = np.zeros_like(z, dtype=bool) if nodata is None else np.asarray(nodata, dtype=bool)
    return DtmGrid(
        width=w,
        height=h,
        cell_size=cell_size,
        origin_x=origin_x,
        origin_y=origin_y,
        elevations=z,
        nodata=mask,
    )


def flat_grid(size: int = 16, cell_size: float = 0.5, value: float = 100.0) -> DtmGrid:
    return make_grid(np.full((size, size), value), cell_size=cell_size)


def plane_grid(size: int = 16, cell_size: float = 0.5, slope_east: float = 0.0, slope_south: float = 0.0) -> DtmGrid:
    cols = np.arange(size) * cell_size
    rows = np.arange(size) * cell_size
    z = slope_east * cols[None, :] + slope_south * rows[:, None]
    return make_grid(z, cell_size=cell_size)


def random_grid(seed: int, size: int = 64, cell_size: float = 0.5, nodata_frac: float = 0.0) -> DtmGrid:
    rng = np.random.default_rng(seed)
    z = rng.normal(0.0, 1.5, size=(size, size)).cumsum(axis=0).cumsum(axis=1) * 0.01
    z += rng.normal(0.0, 0.3, size=(size, size))
    mask = rng.random((size, size)) < nodata_frac
    return make_grid(z, cell_size=cell_size, nodata=mask)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240917)
