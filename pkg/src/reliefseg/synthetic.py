"""Synthetic terrain scenes with known ground truth.

Builds elevation grids containing flat-topped platform mounds ("mesas")
and annular ring mounds with steep flanks, plus the matching label
polygons, so the whole pipeline can be exercised and scored without
survey data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import DtmGrid
from .labels import LabelledPolygon


@dataclass(frozen=True)
class SceneSpec:
    size_px: int = 1024
    cell_size: float = 0.5
    n_mesas: int = 12
    n_rings: int = 6
    mesa_height_m: float = 1.5
    ring_height_m: float = 1.2
    seed: int = 7


def _mesa(z: np.ndarray, row0: int, col0: int, rows: int, cols: int, height: float, ramp_px: int) -> None:
    r = np.arange(z.shape[0])[:, None]
    c = np.arange(z.shape[1])[None, :]
    inside = (r >= row0) & (r < row0 + rows) & (c >= col0) & (c < col0 + cols)
    dist = np.minimum(
        np.minimum(r - row0 + 1, row0 + rows - r), np.minimum(c - col0 + 1, col0 + cols - c)
    ).astype(float)
    profile = np.clip(dist / (ramp_px + 1), 0.0, 1.0) * height
    z[inside] = np.maximum(z[inside], profile[inside])


def _ring(z: np.ndarray, row_c: float, col_c: float, radius_px: float, half_width_px: float, height: float) -> None:
    r = np.arange(z.shape[0])[:, None]
    c = np.arange(z.shape[1])[None, :]
    dist = np.hypot(r - row_c, c - col_c)
    bump = height * np.clip(1.0 - np.abs(dist - radius_px) / half_width_px, 0.0, 1.0)
    np.maximum(z, bump, out=z)


def _rect_polygon(grid_size: int, cell: float, row0: int, col0: int, rows: int, cols: int, pid: str) -> LabelledPolygon:
    origin_y = grid_size * cell
    x0, x1 = col0 * cell, (col0 + cols) * cell
    y1, y0 = origin_y - row0 * cell, origin_y - (row0 + rows) * cell
    ring = np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1], [x0, y0]])
    return LabelledPolygon(cls="platform", outer=ring, id=pid)


def _circle_polygon(grid_size: int, cell: float, row_c: float, col_c: float, radius_px: float, pid: str) -> LabelledPolygon:
    origin_y = grid_size * cell
    cx, cy = col_c * cell, origin_y - row_c * cell
    angles = np.linspace(0.0, 2.0 * math.pi, 49)
    ring = np.stack([cx + radius_px * cell * np.cos(angles), cy + radius_px * cell * np.sin(angles)], axis=1)
    ring[-1] = ring[0]
    return LabelledPolygon(cls="annular", outer=ring, id=pid)


def make_structure_scene(spec: SceneSpec = SceneSpec()) -> tuple[DtmGrid, list[LabelledPolygon]]:
    """Flat plain scattered with mesas and ring mounds, plus labels.

    Objects sit on a jittered grid of slots so they never overlap or
    touch the raster border; the same spec always produces the same
    scene.
    """
    rng = np.random.default_rng(spec.seed)
    size = spec.size_px
    z = np.zeros((size, size), dtype=np.float64)
    labels: list[LabelledPolygon] = []

    total = spec.n_mesas + spec.n_rings
    slots_per_side = math.ceil(math.sqrt(total))
    slot = size // slots_per_side
    positions = [(si, sj) for si in range(slots_per_side) for sj in range(slots_per_side)]
    rng.shuffle(positions)

    for index in range(total):
        si, sj = positions[index]
        margin = slot // 4
        base_r = si * slot + margin
        base_c = sj * slot + margin
        if index < spec.n_mesas:
            rows = int(rng.integers(20, 49))
            cols = int(rng.integers(20, 49))
            row0 = base_r + int(rng.integers(0, max(1, slot - 2 * margin - rows)))
            col0 = base_c + int(rng.integers(0, max(1, slot - 2 * margin - cols)))
            _mesa(z, row0, col0, rows, cols, spec.mesa_height_m, ramp_px=2)
            labels.append(_rect_polygon(size, spec.cell_size, row0, col0, rows, cols, f"mesa-{index:02d}"))
        else:
            radius = float(rng.uniform(10.0, 12.0))
            row_c = base_r + radius + 4 + float(rng.uniform(0, max(1.0, slot - 2 * margin - 2 * radius - 8)))
            col_c = base_c + radius + 4 + float(rng.uniform(0, max(1.0, slot - 2 * margin - 2 * radius - 8)))
            _ring(z, row_c, col_c, radius, 2.0, spec.ring_height_m)
            labels.append(
                _circle_polygon(size, spec.cell_size, row_c, col_c, radius + 2.5, f"ring-{index:02d}")
            )

    grid = DtmGrid(
        width=size,
        height=size,
        cell_size=spec.cell_size,
        origin_x=0.0,
        origin_y=size * spec.cell_size,
        elevations=z,
        nodata=np.zeros((size, size), dtype=bool),
    )
    return grid, labels
