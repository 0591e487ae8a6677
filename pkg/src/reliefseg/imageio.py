"""Lossless 8-bit PNG IO for composite images and masks."""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np
from PIL import Image

from .grid import BinaryMask, ReliefImage


def write_image(content: ReliefImage | BinaryMask | np.ndarray, path: str | os.PathLike) -> None:
    """Write 8-bit 1- or 3-channel content as PNG.

    Masks are stored as 8-bit gray with 0 = background, 255 = positive.
    The round trip through :func:`read_image` is bit-exact.
    """
    if isinstance(content, ReliefImage):
        arr = np.asarray(content.channels, dtype=np.uint8)
    elif isinstance(content, BinaryMask):
        arr = np.where(content.pixels, 255, 0).astype(np.uint8)
    else:
        arr = np.asarray(content)
        if arr.dtype != np.uint8:
            raise ValueError(f"unsupported dtype {arr.dtype}; only 8-bit content is written")
    if arr.ndim == 2:
        img = Image.fromarray(arr, mode="L")
    elif arr.ndim == 3 and arr.shape[2] == 3:
        img = Image.fromarray(arr, mode="RGB")
    else:
        raise ValueError(f"unsupported image shape {arr.shape}; expected HxW or HxWx3")
    img.save(Path(path), format="PNG")


def read_image(path: str | os.PathLike) -> np.ndarray:
    """Read an 8-bit gray or RGB PNG back as a uint8 array.

    Raises ValueError for unsupported bit depths or band layouts (e.g.
    16-bit or paletted files); this IO layer is deliberately strict so
    the batch protocol stays bit-exact.
    """
    with Image.open(Path(path)) as img:
        if img.mode == "L":
            return np.asarray(img, dtype=np.uint8)
        if img.mode == "RGB":
            return np.asarray(img, dtype=np.uint8)
        raise ValueError(
            f"unsupported image mode {img.mode!r} in {os.fspath(path)}; "
            "only 8-bit L and RGB are supported"
        )


def read_mask(path: str | os.PathLike) -> BinaryMask:
    """Read an 8-bit gray PNG as a mask (any value >= 128 is positive)."""
    arr = read_image(path)
    if arr.ndim != 2:
        raise ValueError(f"mask file {os.fspath(path)} is not single-channel")
    return BinaryMask.from_array(arr >= 128)
