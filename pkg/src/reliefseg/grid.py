"""Elevation grids, derivative rasters, masks, and coordinate transforms.

Conventions used throughout the package:

* Rasters are row-major numpy arrays with row 0 at the northern edge.
* ``(origin_x, origin_y)`` is the world coordinate of the north-west
  corner of the raster; moving east increases the column, moving north
  decreases the row.
* Integer pixel coordinates address pixel corners, so pixel centers sit
  at half-integer coordinates.
* Nodata cells are carried as a boolean mask and are excluded from every
  kernel output.

All container types are value-semantic: arrays are copied on
construction and frozen, so instances can be shared freely between
threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np
from numpy.typing import NDArray

FloatArray = NDArray[np.float64]
BoolArray = NDArray[np.bool_]
Uint8Array = NDArray[np.uint8]

#: Unit tags accepted by :class:`ChannelRaster`.
CHANNEL_UNITS = ("dimensionless", "degrees", "unit_interval")


def _frozen_array(values: Any, dtype: type) -> np.ndarray:
    arr = np.ascontiguousarray(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class GridGeometry:
    """Pixel grid placed in a planar-meter world frame."""

    width: int
    height: int
    cell_size: float
    origin_x: float = 0.0
    origin_y: float = 0.0

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"grid dimensions must be positive, got {self.width}x{self.height}")
        if self.cell_size <= 0:
            raise ValueError(f"cell_size must be positive, got {self.cell_size}")

    def world_to_pixel(self, x: float, y: float) -> tuple[float, float]:
        """Map world meters to fractional ``(col, row)`` pixel coordinates.

        ``(origin_x, origin_y)`` maps to ``(0.0, 0.0)``; east is +col and
        north is -row. Out-of-bounds results are legal, callers clip.
        """
        col = (x - self.origin_x) / self.cell_size
        row = (self.origin_y - y) / self.cell_size
        return col, row

    def pixel_to_world(self, col: float, row: float) -> tuple[float, float]:
        """Inverse of :meth:`world_to_pixel`."""
        x = self.origin_x + col * self.cell_size
        y = self.origin_y - row * self.cell_size
        return x, y

    @property
    def cell_area(self) -> float:
        return self.cell_size * self.cell_size


@dataclass(frozen=True)
class DtmGrid:
    """Georeferenced single-band elevation raster with a nodata mask.

    ``elevations`` is ``(height, width)`` float64 in meters; ``nodata``
    is a boolean mask of the same shape (True = no valid elevation).
    ``crs`` is an opaque pass-through string; all coordinates are
    treated as planar meters.
    """

    width: int
    height: int
    cell_size: float
    origin_x: float
    origin_y: float
    elevations: FloatArray
    nodata: BoolArray
    crs: str = ""

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"grid dimensions must be positive, got {self.width}x{self.height}")
        if self.cell_size <= 0:
            raise ValueError(f"cell_size must be positive, got {self.cell_size}")
        elev = _frozen_array(self.elevations, np.float64)
        mask = _frozen_array(self.nodata, np.bool_)
        if elev.shape != (self.height, self.width):
            raise ValueError(
                f"elevations shape {elev.shape} does not match {self.height}x{self.width}"
            )
        if mask.shape != elev.shape:
            raise ValueError(f"nodata shape {mask.shape} does not match {elev.shape}")
        object.__setattr__(self, "elevations", elev)
        object.__setattr__(self, "nodata", mask)

    @property
    def geometry(self) -> GridGeometry:
        return GridGeometry(self.width, self.height, self.cell_size, self.origin_x, self.origin_y)

    def world_to_pixel(self, x: float, y: float) -> tuple[float, float]:
        return self.geometry.world_to_pixel(x, y)

    def pixel_to_world(self, col: float, row: float) -> tuple[float, float]:
        return self.geometry.pixel_to_world(col, row)

    def masked_elevations(self) -> FloatArray:
        """Elevations with nodata cells replaced by NaN (fresh array)."""
        out = np.array(self.elevations, dtype=np.float64)
        out[self.nodata] = np.nan
        return out


@dataclass(frozen=True)
class ChannelRaster:
    """Single-channel float derivative raster aligned to a grid.

    ``unit`` is one of ``dimensionless`` (sky-view factor),
    ``degrees`` (openness, slope) or ``unit_interval`` (hillshade,
    normalized elevation).
    """

    width: int
    height: int
    values: FloatArray
    unit: str
    nodata: BoolArray

    def __post_init__(self) -> None:
        if self.unit not in CHANNEL_UNITS:
            raise ValueError(f"unknown unit {self.unit!r}, expected one of {CHANNEL_UNITS}")
        vals = _frozen_array(self.values, np.float64)
        mask = _frozen_array(self.nodata, np.bool_)
        if vals.shape != (self.height, self.width):
            raise ValueError(f"values shape {vals.shape} does not match {self.height}x{self.width}")
        if mask.shape != vals.shape:
            raise ValueError(f"nodata shape {mask.shape} does not match {vals.shape}")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "nodata", mask)

    def valid_values(self) -> FloatArray:
        return self.values[~self.nodata]


@dataclass(frozen=True)
class ReliefImage:
    """8-bit three-channel composite of terrain derivatives.

    Channel order is sky-view factor, positive openness, slope (the
    composite the pipeline feeds to segmentation backends). ``stretch``
    records the per-channel linear 8-bit mapping that produced it, so
    the image is reproducible from its inputs.
    """

    width: int
    height: int
    channels: Uint8Array  # (height, width, 3)
    stretch: Any = None

    def __post_init__(self) -> None:
        arr = _frozen_array(self.channels, np.uint8)
        if arr.shape != (self.height, self.width, 3):
            raise ValueError(
                f"channels shape {arr.shape} does not match ({self.height}, {self.width}, 3)"
            )
        object.__setattr__(self, "channels", arr)


@dataclass(frozen=True)
class BinaryMask:
    """Per-pixel boolean segmentation result aligned to a raster window.

    ``window`` is the ``(col_off, row_off)`` pixel offset of this mask
    inside its parent raster, or None for a whole-raster mask.
    """

    width: int
    height: int
    pixels: BoolArray
    window: tuple[int, int] | None = None

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"mask dimensions must be positive, got {self.width}x{self.height}")
        arr = _frozen_array(self.pixels, np.bool_)
        if arr.shape != (self.height, self.width):
            raise ValueError(f"pixels shape {arr.shape} does not match {self.height}x{self.width}")
        object.__setattr__(self, "pixels", arr)

    @classmethod
    def from_array(cls, pixels: np.ndarray, window: tuple[int, int] | None = None) -> "BinaryMask":
        arr = np.asarray(pixels, dtype=bool)
        return cls(width=arr.shape[1], height=arr.shape[0], pixels=arr, window=window)

    def positive_count(self) -> int:
        return int(self.pixels.sum())


# ---------------------------------------------------------------------------
# ESRI ASCII grid IO
# ---------------------------------------------------------------------------

_ASCII_HEADER_KEYS = ("ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "nodata_value")


class AsciiGridError(ValueError):
    """Malformed ESRI ASCII grid document."""


def load_ascii_grid(text: str, crs: str = "") -> DtmGrid:
    """Parse an ESRI ASCII grid document into a :class:`DtmGrid`.

    The header must contain ncols, nrows, xllcorner, yllcorner,
    cellsize and nodata_value (case-insensitive, any order). The
    lower-left-corner origin of the format is converted to this
    package's north-west-corner convention.
    """
    header: dict[str, float] = {}
    tokens: list[str] = []
    lines = text.splitlines()
    i = 0
    while i < len(lines):
        parts = lines[i].split()
        if len(parts) == 2 and parts[0].lower() in _ASCII_HEADER_KEYS:
            key = parts[0].lower()
            if key in header:
                raise AsciiGridError(f"duplicate header key {key!r}")
            try:
                header[key] = float(parts[1])
            except ValueError:
                raise AsciiGridError(f"non-numeric value {parts[1]!r} for header key {key!r}") from None
            i += 1
        elif len(parts) == 2 and parts[0].lower() in ("xllcenter", "yllcenter"):
            raise AsciiGridError(
                f"header key {parts[0].lower()!r} not supported; use xllcorner/yllcorner"
            )
        else:
            break
    missing = [k for k in _ASCII_HEADER_KEYS if k not in header]
    if missing:
        raise AsciiGridError(f"missing header key(s): {', '.join(missing)}")

    for line in lines[i:]:
        tokens.extend(line.split())

    ncols = int(header["ncols"])
    nrows = int(header["nrows"])
    if ncols <= 0 or nrows <= 0:
        raise AsciiGridError(f"ncols/nrows must be positive, got {ncols}/{nrows}")
    if len(tokens) != ncols * nrows:
        raise AsciiGridError(
            f"expected {ncols * nrows} elevation values, found {len(tokens)}"
        )
    try:
        values = np.array([float(t) for t in tokens], dtype=np.float64)
    except ValueError:
        bad = next(t for t in tokens if not _is_number(t))
        raise AsciiGridError(f"non-numeric elevation token {bad!r}") from None

    elevations = values.reshape(nrows, ncols)
    nodata_value = header["nodata_value"]
    nodata = elevations == nodata_value
    elevations = np.where(nodata, 0.0, elevations)

    cell = header["cellsize"]
    if cell <= 0:
        raise AsciiGridError(f"cellsize must be positive, got {cell}")
    return DtmGrid(
        width=ncols,
        height=nrows,
        cell_size=cell,
        origin_x=header["xllcorner"],
        origin_y=header["yllcorner"] + nrows * cell,
        elevations=elevations,
        nodata=nodata,
        crs=crs,
    )


def dump_ascii_grid(grid: DtmGrid, nodata_value: float = -9999.0) -> str:
    """Serialize a grid as an ESRI ASCII document.

    Elevations are printed with :func:`repr` so a load/dump round trip
    preserves every non-nodata value exactly.
    """
    lines = [
        f"ncols {grid.width}",
        f"nrows {grid.height}",
        f"xllcorner {grid.origin_x!r}",
        f"yllcorner {(grid.origin_y - grid.height * grid.cell_size)!r}",
        f"cellsize {grid.cell_size!r}",
        f"nodata_value {nodata_value!r}",
    ]
    for r in range(grid.height):
        row = [
            repr(nodata_value) if grid.nodata[r, c] else repr(float(grid.elevations[r, c]))
            for c in range(grid.width)
        ]
        lines.append(" ".join(row))
    return "\n".join(lines) + "\n"


def _is_number(token: str) -> bool:
    try:
        float(token)
        return True
    except ValueError:
        return False
