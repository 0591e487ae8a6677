"""Terrain derivative rasters: slope, hillshade, sky-view factor, openness.

The horizon scan estimates, for every pixel and a set of evenly spaced
compass directions, the highest elevation angle to the terrain within a
search radius. Sky-view factor and positive openness are per-pixel
aggregates of those angles; both are rotation-invariant representations
(unlike hillshade), which is what makes them safe inputs for rotation
augmentation.

Two implementation constraints worth knowing about:

* Sampling stencils are computed with trigonometry only for directions
  in the first quadrant and propagated to the other quadrants by exact
  integer rotations with bit-copied weights, and per-pixel direction
  reductions sum in value-sorted order. Together these make SVF and
  openness outputs commute with 90-degree grid rotations bitwise when
  ``n_directions`` is a multiple of 4.
* Horn gradients group their symmetric taps as ``(a + b) + 2*m`` so the
  same holds for slope.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .grid import ChannelRaster, DtmGrid, FloatArray, ReliefImage


@dataclass(frozen=True)
class HorizonScanParams:
    """Search geometry for the horizon scan.

    Defaults (16 directions, 10 m radius) suit 0.5 m terrain rasters of
    structures in the 10 m size class; both are exposed because the
    right values depend on target size and raster resolution.
    """

    n_directions: int = 16
    radius_m: float = 10.0

    def __post_init__(self) -> None:
        if self.n_directions < 4 or self.n_directions % 2 != 0:
            raise ValueError(f"n_directions must be even and >= 4, got {self.n_directions}")
        if self.radius_m <= 0:
            raise ValueError(f"radius_m must be positive, got {self.radius_m}")

    def steps(self, cell_size: float) -> int:
        """Number of one-cell-length samples along each ray."""
        if self.radius_m < 2 * cell_size:
            raise ValueError(
                f"radius_m={self.radius_m} smaller than two cells ({2 * cell_size})"
            )
        return int(math.floor(self.radius_m / cell_size + 1e-12))


@dataclass(frozen=True)
class ChannelStretch:
    """Linear mapping of one float channel to 8 bits.

    ``lo`` maps to 0 and ``hi`` to 255 (swapped when ``invert``);
    values outside the range clamp.
    """

    lo: float
    hi: float
    invert: bool = False

    def __post_init__(self) -> None:
        if not self.hi > self.lo:
            raise ValueError(f"stretch needs hi > lo, got [{self.lo}, {self.hi}]")

    def apply(self, values: np.ndarray) -> np.ndarray:
        t = np.clip((np.asarray(values, dtype=np.float64) - self.lo) / (self.hi - self.lo), 0.0, 1.0)
        if self.invert:
            t = 1.0 - t
        return np.floor(255.0 * t + 0.5).astype(np.uint8)


@dataclass(frozen=True)
class StretchParams:
    """Per-channel 8-bit stretches for the composite image.

    Defaults keep archaeological micro-relief in the visible range:
    sky-view factor [0.65, 1], openness [60 deg, 95 deg], slope
    [0 deg, 50 deg] inverted (flat terrain renders bright).
    """

    svf: ChannelStretch = ChannelStretch(0.65, 1.0)
    openness: ChannelStretch = ChannelStretch(60.0, 95.0)
    slope: ChannelStretch = ChannelStretch(0.0, 50.0, invert=True)


# ---------------------------------------------------------------------------
# Horn gradients, slope, hillshade
# ---------------------------------------------------------------------------


def _horn_gradients(grid: DtmGrid) -> tuple[FloatArray, FloatArray]:
    """Horn 3x3 gradients (dz/d_east, dz/d_south) in m/m.

    Border pixels and pixels adjacent to nodata come out NaN. Symmetric
    taps are grouped as (a + b) + 2*m; see module docstring.
    """
    if grid.height < 3 or grid.width < 3:
        raise ValueError(f"grid {grid.width}x{grid.height} smaller than the 3x3 kernel")
    z = grid.masked_elevations()
    zp = np.pad(z, 1, constant_values=np.nan)
    tl, tc, tr = zp[:-2, :-2], zp[:-2, 1:-1], zp[:-2, 2:]
    ml, mr = zp[1:-1, :-2], zp[1:-1, 2:]
    bl, bc, br = zp[2:, :-2], zp[2:, 1:-1], zp[2:, 2:]
    denom = 8.0 * grid.cell_size
    gx = (((tr + br) + 2.0 * mr) - ((tl + bl) + 2.0 * ml)) / denom
    gy_south = (((bl + br) + 2.0 * bc) - ((tl + tr) + 2.0 * tc)) / denom
    return gx, gy_south


def compute_slope(grid: DtmGrid) -> ChannelRaster:
    """Slope angle in degrees from the Horn 3x3 finite difference.

    slope = atan(|grad z|); borders and nodata-adjacent pixels are
    flagged nodata rather than estimated one-sided.
    """
    gx, gy = _horn_gradients(grid)
    mag = np.sqrt(gx * gx + gy * gy)
    slope = np.degrees(np.arctan(mag))
    nodata = ~np.isfinite(slope) | grid.nodata
    return ChannelRaster(
        width=grid.width,
        height=grid.height,
        values=np.where(nodata, 0.0, slope),
        unit="degrees",
        nodata=nodata,
    )


def compute_hillshade(
    grid: DtmGrid, azimuth_deg: float = 315.0, altitude_deg: float = 45.0
) -> ChannelRaster:
    """Lambertian shading under a distant light source, in [0, 1].

    value = max(0, cos(zenith) cos(slope) + sin(zenith) sin(slope)
    cos(sun_azimuth - aspect)); flat terrain yields sin(altitude).
    Orientation-dependent by nature (the rotation-invariance tests
    assert that it is).
    """
    if not 0.0 < altitude_deg <= 90.0:
        raise ValueError(f"altitude must be in (0, 90] degrees, got {altitude_deg}")
    gx, gy_south = _horn_gradients(grid)
    slope_rad = np.arctan(np.sqrt(gx * gx + gy_south * gy_south))
    # Azimuth of steepest descent, clockwise from north.
    aspect_rad = np.arctan2(-gx, gy_south)
    zenith = math.radians(90.0 - altitude_deg)
    az = math.radians(azimuth_deg)
    value = math.cos(zenith) * np.cos(slope_rad) + math.sin(zenith) * np.sin(slope_rad) * np.cos(
        az - aspect_rad
    )
    nodata = ~np.isfinite(value) | grid.nodata
    value = np.clip(np.where(nodata, 0.0, value), 0.0, 1.0)
    return ChannelRaster(
        width=grid.width, height=grid.height, values=value, unit="unit_interval", nodata=nodata
    )


# ---------------------------------------------------------------------------
# Horizon scan
# ---------------------------------------------------------------------------


def _rotate_cells_cw(cells: np.ndarray) -> np.ndarray:
    """Exact 90-degree clockwise rotation of integer (row, col) offsets."""
    return np.stack([cells[:, 1], -cells[:, 0]], axis=1)


@lru_cache(maxsize=8)
def _stencil_tables(n_directions: int, n_steps: int):
    """Bilinear sampling stencils per (direction, step).

    Returns ``tables[d][k] = (cells, weights)`` where ``cells`` is an
    (E, 2) int array of (row, col) offsets and ``weights`` the matching
    bilinear weights (zero-weight entries dropped so on-axis rays stay
    valid along raster edges). Direction d has azimuth d*360/n
    clockwise from north; east is +col, north is -row.
    """
    if n_directions % 4 == 0:
        n_base = n_directions // 4
        copies = 4
    else:  # even but not a multiple of 4: build a half circle, point-mirror it
        n_base = n_directions // 2
        copies = 2

    base: list[list[tuple[np.ndarray, np.ndarray]]] = []
    for i in range(n_base):
        az = 2.0 * math.pi * i / n_directions
        dcol = math.sin(az)
        drow = -math.cos(az)
        steps = []
        for k in range(1, n_steps + 1):
            col = k * dcol
            row = k * drow
            r0 = math.floor(row)
            c0 = math.floor(col)
            fr = row - r0
            fc = col - c0
            cells = []
            weights = []
            for dr, wr in ((0, 1.0 - fr), (1, fr)):
                for dc, wc in ((0, 1.0 - fc), (1, fc)):
                    w = wr * wc
                    # sub-ulp weights are trig noise from samples landing
                    # on grid lines; keeping them would make edge/nodata
                    # truncation depend on that noise
                    if w > 1e-12:
                        cells.append((r0 + dr, c0 + dc))
                        weights.append(w)
            steps.append((np.array(cells, dtype=np.int64), np.array(weights, dtype=np.float64)))
        base.append(steps)

    tables = list(base)
    for _ in range(1, copies):
        prev = tables[-n_base:]
        if copies == 4:
            turned = [
                [(_rotate_cells_cw(cells), weights) for cells, weights in steps] for steps in prev
            ]
        else:
            turned = [[(-cells, weights) for cells, weights in steps] for steps in prev]
        tables.extend(turned)
    return tuple(tuple(steps) for steps in tables)


def _horizon_tangent_stack(grid: DtmGrid, params: HorizonScanParams) -> FloatArray:
    """max tan(elevation angle) per direction, shape (n, H, W).

    Rays step one cell-length at a time with bilinear sampling and
    truncate at the raster edge or the first nodata sample; a ray with
    no valid sample contributes angle 0.
    """
    n_steps = params.steps(grid.cell_size)
    tables = _stencil_tables(params.n_directions, n_steps)
    h, w = grid.height, grid.width
    z = grid.masked_elevations()
    pad = n_steps + 1
    zp = np.pad(z, pad, constant_values=np.nan)
    center_valid = ~grid.nodata

    out = np.empty((params.n_directions, h, w), dtype=np.float64)
    for d, steps in enumerate(tables):
        best = np.full((h, w), -np.inf)
        alive = center_valid.copy()
        any_sample = np.zeros((h, w), dtype=bool)
        for k, (cells, weights) in enumerate(steps, start=1):
            sample = None
            for (dr, dc), wgt in zip(cells, weights):
                view = zp[pad + dr : pad + dr + h, pad + dc : pad + dc + w]
                term = wgt * view
                sample = term if sample is None else sample + term
            alive &= np.isfinite(sample)
            any_sample |= alive
            ratio = (sample - z) / (k * grid.cell_size)
            np.maximum(best, np.where(alive, ratio, -np.inf), out=best)
        out[d] = np.where(any_sample, best, 0.0)
    return out


def compute_horizon_angles(
    grid: DtmGrid, pixel: tuple[int, int], params: HorizonScanParams | None = None
) -> FloatArray:
    """Per-direction horizon elevation angles (degrees) at one pixel.

    ``pixel`` is (col, row). Angles may be negative; a ray that leaves
    the raster or hits nodata before its first sample reports 0.
    """
    params = params or HorizonScanParams()
    col, row = pixel
    if not (0 <= col < grid.width and 0 <= row < grid.height):
        raise ValueError(f"pixel {pixel} outside {grid.width}x{grid.height} grid")
    n_steps = params.steps(grid.cell_size)
    tables = _stencil_tables(params.n_directions, n_steps)
    z = grid.masked_elevations()
    z0 = z[row, col]
    gammas = np.zeros(params.n_directions, dtype=np.float64)
    if not np.isfinite(z0):
        return gammas
    for d, steps in enumerate(tables):
        best = None
        for k, (cells, weights) in enumerate(steps, start=1):
            sample = 0.0
            ok = True
            for (dr, dc), wgt in zip(cells, weights):
                r, c = row + int(dr), col + int(dc)
                if not (0 <= r < grid.height and 0 <= c < grid.width) or grid.nodata[r, c]:
                    ok = False
                    break
                sample += wgt * z[r, c]
            if not ok:
                break
            ratio = (sample - z0) / (k * grid.cell_size)
            best = ratio if best is None else max(best, ratio)
        if best is not None:
            gammas[d] = math.degrees(math.atan(best))
    return gammas


def _sorted_mean(values: FloatArray) -> FloatArray:
    """Mean over axis 0 computed in value-sorted order.

    Sorting first makes the reduction a function of the per-pixel value
    multiset, not of direction numbering; see module docstring.
    """
    return np.sort(values, axis=0).sum(axis=0) / values.shape[0]


def compute_svf_and_openness(
    grid: DtmGrid,
    params: HorizonScanParams | None = None,
    clamp_negative: bool = True,
) -> tuple[ChannelRaster, ChannelRaster]:
    """Sky-view factor and positive openness from one horizon scan.

    SVF = 1 - mean(sin(max(angle, 0))), in [0, 1]; openness is the mean
    zenith angle 90 - angle in degrees. With ``clamp_negative`` (the
    default) negative horizon angles contribute as 0 so openness stays
    in [0, 90].
    """
    params = params or HorizonScanParams()
    tangents = _horizon_tangent_stack(grid, params)
    pos = np.maximum(tangents, 0.0)
    svf_vals = 1.0 - _sorted_mean(np.sin(np.arctan(pos)))
    po_source = pos if clamp_negative else tangents
    po_vals = 90.0 - _sorted_mean(np.degrees(np.arctan(po_source)))
    nodata = np.array(grid.nodata)
    svf = ChannelRaster(
        width=grid.width,
        height=grid.height,
        values=np.where(nodata, 0.0, svf_vals),
        unit="dimensionless",
        nodata=nodata,
    )
    po = ChannelRaster(
        width=grid.width,
        height=grid.height,
        values=np.where(nodata, 0.0, po_vals),
        unit="degrees",
        nodata=nodata,
    )
    return svf, po


def compute_svf(grid: DtmGrid, params: HorizonScanParams | None = None) -> ChannelRaster:
    """Fraction of the sky hemisphere visible from each pixel (flat ground = 1)."""
    svf, _ = compute_svf_and_openness(grid, params)
    return svf


def compute_positive_openness(
    grid: DtmGrid, params: HorizonScanParams | None = None, clamp_negative: bool = True
) -> ChannelRaster:
    """Mean zenith angle to the horizon, in degrees (flat ground = 90)."""
    _, po = compute_svf_and_openness(grid, params, clamp_negative=clamp_negative)
    return po


# ---------------------------------------------------------------------------
# Elevation normalization and 8-bit composition
# ---------------------------------------------------------------------------


def normalize_elevation(grid: DtmGrid) -> ChannelRaster:
    """Min-max normalize valid elevations of a tile to [0, 1].

    A constant tile maps to all zeros (avoids 0/0); an all-nodata tile
    is an error.
    """
    valid = ~grid.nodata
    if not valid.any():
        raise ValueError("cannot normalize an all-nodata tile")
    z = grid.elevations
    zmin = float(z[valid].min())
    zmax = float(z[valid].max())
    if zmax == zmin:
        values = np.zeros_like(z)
    else:
        values = (z - zmin) / (zmax - zmin)
    nodata = np.array(grid.nodata)
    return ChannelRaster(
        width=grid.width,
        height=grid.height,
        values=np.where(nodata, 0.0, values),
        unit="unit_interval",
        nodata=nodata,
    )


def compose_relief_image(
    svf: ChannelRaster,
    openness: ChannelRaster,
    slope: ChannelRaster,
    stretch: StretchParams | None = None,
) -> ReliefImage:
    """Stack stretched svf/openness/slope into the 3-channel 8-bit composite.

    Nodata in any input zeroes all three channels of that pixel.
    """
    stretch = stretch or StretchParams()
    shapes = {(r.height, r.width) for r in (svf, openness, slope)}
    if len(shapes) != 1:
        raise ValueError(f"channel dimensions differ: {sorted(shapes)}")
    nodata = svf.nodata | openness.nodata | slope.nodata
    chans = np.stack(
        [
            stretch.svf.apply(svf.values),
            stretch.openness.apply(openness.values),
            stretch.slope.apply(slope.values),
        ],
        axis=-1,
    )
    chans[nodata] = 0
    return ReliefImage(width=svf.width, height=svf.height, channels=chans, stretch=stretch)


def replicate_single_channel(raster: ChannelRaster, stretch: ChannelStretch) -> ReliefImage:
    """Stretch one channel to 8 bits and replicate it across all three.

    Used by the representation-comparison harness so single-derivative
    images fit backends that expect 3-channel input.
    """
    one = stretch.apply(raster.values)
    chans = np.stack([one, one, one], axis=-1)
    chans[raster.nodata] = 0
    return ReliefImage(width=raster.width, height=raster.height, channels=chans, stretch=stretch)


def derive_relief_image(
    grid: DtmGrid,
    params: HorizonScanParams | None = None,
    stretch: StretchParams | None = None,
) -> ReliefImage:
    """DTM straight to the svf/openness/slope composite."""
    svf, po = compute_svf_and_openness(grid, params)
    return compose_relief_image(svf, po, compute_slope(grid), stretch)
