"""Independent brute-force reference implementations used by the tests.

Everything here is written as a plain per-cell/per-vertex loop from
first principles so the production kernels are checked against code
that shares no machinery with them.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np


@lru_cache(maxsize=4)
def _direction_vectors(n_directions: int) -> tuple[tuple[float, float], ...]:
    """(dcol, drow) unit steps, azimuth index*360/n clockwise from north.

    Components that are axis-aligned up to trig rounding snap to exact
    0/±1 so on-axis rays march exactly along grid lines.
    """

    def snap(v: float) -> float:
        for target in (-1.0, 0.0, 1.0):
            if abs(v - target) < 1e-12:
                return target
        return v

    vectors = []
    for index in range(n_directions):
        az = 2.0 * math.pi * index / n_directions
        vectors.append((snap(math.sin(az)), snap(-math.cos(az))))
    return tuple(vectors)


def _horizon_kernel(z, bad, h, w, cell_size, row, col, dirs, n_steps):
    """Ray-march horizon tangent ratios at one pixel over nested lists.

    Walks one cell-length per step, bilinearly interpolating elevation,
    truncating at the raster edge or first nodata sample; a ray with no
    valid sample reports ratio 0.
    """
    z0 = z[row][col]
    floor = math.floor
    ratios = []
    for dcol, drow in dirs:
        best = None
        for k in range(1, n_steps + 1):
            c = col + k * dcol
            r = row + k * drow
            r0 = floor(r)
            c0 = floor(c)
            fr = r - r0
            fc = c - c0
            value = 0.0
            valid = True
            for dr, wr in ((0, 1.0 - fr), (1, fr)):
                if not valid:
                    break
                for dc, wc in ((0, 1.0 - fc), (1, fc)):
                    wgt = wr * wc
                    if wgt <= 1e-12:  # grid-line samples: ignore phantom neighbors
                        continue
                    rr = r0 + dr
                    cc = c0 + dc
                    if rr < 0 or rr >= h or cc < 0 or cc >= w or bad[rr][cc]:
                        valid = False
                        break
                    value += wgt * z[rr][cc]
            if not valid:
                break
            ratio = (value - z0) / (k * cell_size)
            if best is None or ratio > best:
                best = ratio
        ratios.append(0.0 if best is None else best)
    return ratios


def horizon_angles_bruteforce(
    elevations: np.ndarray,
    nodata: np.ndarray,
    cell_size: float,
    row: int,
    col: int,
    n_directions: int,
    radius_m: float,
) -> list[float]:
    """Horizon elevation angles (degrees) at one pixel."""
    h, w = elevations.shape
    if nodata[row, col]:
        return [0.0] * n_directions
    n_steps = int(math.floor(radius_m / cell_size + 1e-12))
    ratios = _horizon_kernel(
        elevations.tolist(),
        nodata.tolist(),
        h,
        w,
        cell_size,
        row,
        col,
        _direction_vectors(n_directions),
        n_steps,
    )
    return [math.degrees(math.atan(t)) for t in ratios]


def svf_po_bruteforce(
    elevations: np.ndarray,
    nodata: np.ndarray,
    cell_size: float,
    n_directions: int,
    radius_m: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-pixel sky-view factor and clamped positive openness (degrees)."""
    h, w = elevations.shape
    z = elevations.tolist()
    bad = nodata.tolist()
    dirs = _direction_vectors(n_directions)
    n_steps = int(math.floor(radius_m / cell_size + 1e-12))
    svf = np.zeros((h, w), dtype=np.float64)
    po = np.zeros((h, w), dtype=np.float64)
    sin, atan, degrees = math.sin, math.atan, math.degrees
    for r in range(h):
        for c in range(w):
            if bad[r][c]:
                continue
            ratios = _horizon_kernel(z, bad, h, w, cell_size, r, c, dirs, n_steps)
            sin_sum = 0.0
            zen_sum = 0.0
            for t in ratios:
                gamma = degrees(atan(t))
                gpos = gamma if gamma > 0.0 else 0.0
                sin_sum += sin(math.radians(gpos))
                zen_sum += 90.0 - gpos
            svf[r, c] = 1.0 - sin_sum / n_directions
            po[r, c] = zen_sum / n_directions
    return svf, po


def point_in_polygon(x: float, y: float, rings: list[np.ndarray]) -> bool:
    """Even-odd ray-cast over all rings (holes flip parity)."""
    inside = False
    for ring in rings:
        v = np.asarray(ring, dtype=float)
        for i in range(len(v) - 1):
            x1, y1 = v[i]
            x2, y2 = v[i + 1]
            if (y1 <= y) != (y2 <= y):
                xc = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
                if x < xc:
                    inside = not inside
    return inside


def rasterize_bruteforce(rings: list[np.ndarray], width: int, height: int) -> np.ndarray:
    """Pixel-center even-odd rasterization of one polygon (pixel coords)."""
    out = np.zeros((height, width), dtype=bool)
    for r in range(height):
        for c in range(width):
            out[r, c] = point_in_polygon(c + 0.5, r + 0.5, rings)
    return out


def pixel_counts_bruteforce(pred: np.ndarray, gt: np.ndarray) -> tuple[int, int, int]:
    """(TP, FP, FN) by an explicit double loop."""
    tp = fp = fn = 0
    h, w = pred.shape
    pl = pred.tolist()
    gl = gt.tolist()
    for r in range(h):
        for c in range(w):
            p = pl[r][c]
            g = gl[r][c]
            if p and g:
                tp += 1
            elif p and not g:
                fp += 1
            elif g and not p:
                fn += 1
    return tp, fp, fn


def shoelace_bruteforce(ring: np.ndarray) -> float:
    """Unsigned polygon area by the textbook cross-product sum."""
    v = np.asarray(ring, dtype=float)
    total = 0.0
    for i in range(len(v) - 1):
        total += v[i, 0] * v[i + 1, 1] - v[i + 1, 0] * v[i, 1]
    return abs(total) / 2.0
