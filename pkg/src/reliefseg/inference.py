"""Sliding-window inference over large rasters with a pluggable backend.

Backends consume 256x256x3 8-bit tiles and return binary masks; the
orchestrator tiles arbitrarily large images with overlapping windows,
ORs the per-window masks (so objects clipped by one window boundary are
recovered by a neighboring window), and optionally merges a second pass
run at 2x magnification, downscaled positive-preserving.

Two backend kinds exist: a deterministic in-process baseline used to
exercise the pipeline end to end without a model, and a subprocess
backend speaking a file-based batch protocol (see
:func:`run_backend_batch`), which is where a neural model plugs in.
"""

from __future__ import annotations

import json
import shutil
import subprocess
import tempfile
import uuid
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .dataset import scale_image_anisotropic
from .grid import BinaryMask, ReliefImage
from .imageio import read_image, write_image

#: Steepness cut on the inverted slope channel: values strictly below
#: this 8-bit level (slope above ~half the stretch range) count as steep.
BASELINE_STEEP_LEVEL = 128


class ProtocolError(RuntimeError):
    """Subprocess backend broke the batch protocol."""


@dataclass(frozen=True)
class BackendSpec:
    """Which backend to run and how.

    ``kind`` is "in-process-baseline" or "subprocess"; subprocess
    backends are invoked as ``command --batch <dir>`` and must follow
    the batch-directory protocol.
    """

    kind: str = "in-process-baseline"
    command: tuple[str, ...] = ()
    batch_root: str | None = None
    timeout_s: float = 300.0

    def __post_init__(self) -> None:
        if self.kind not in ("in-process-baseline", "subprocess"):
            raise ValueError(f"unknown backend kind {self.kind!r}")
        if self.kind == "subprocess" and not self.command:
            raise ValueError("subprocess backend requires a non-empty command")
        if self.timeout_s <= 0:
            raise ValueError("timeout_s must be positive")


@dataclass(frozen=True)
class InferenceConfig:
    window: int = 256
    stride: int = 128
    scales: tuple[int, ...] = (1, 2)
    cls: str = "platform"

    def __post_init__(self) -> None:
        if not 0 < self.stride <= self.window:
            raise ValueError(f"stride must be in (0, window], got {self.stride}/{self.window}")
        if not self.scales or not set(self.scales) <= {1, 2}:
            raise ValueError(f"scales must be a non-empty subset of {{1, 2}}, got {self.scales}")


# ---------------------------------------------------------------------------
# Baseline backend
# ---------------------------------------------------------------------------


def baseline_segment(tile) -> BinaryMask:
    """Deterministic non-neural stand-in: steep rims, closed and filled.

    Thresholds the (inverted) slope channel so steep pixels go positive,
    closes with a 5x5 element to seal small gaps in rims, then fills
    bounded interiors. Meant for pipeline verification, not accuracy.
    """
    arr = _tile_array(tile)
    steep = arr[..., 2] < BASELINE_STEEP_LEVEL
    closed = ndimage.binary_erosion(
        ndimage.binary_dilation(steep, structure=np.ones((5, 5), dtype=bool)),
        structure=np.ones((5, 5), dtype=bool),
    )
    return BinaryMask.from_array(ndimage.binary_fill_holes(closed))


def _tile_array(tile) -> np.ndarray:
    arr = tile.channels if isinstance(tile, ReliefImage) else np.asarray(tile)
    if arr.ndim != 3 or arr.shape[2] != 3 or arr.dtype != np.uint8:
        raise ValueError(f"tiles must be 8-bit HxWx3, got {arr.dtype} {arr.shape}")
    return arr


# ---------------------------------------------------------------------------
# Subprocess batch protocol
# ---------------------------------------------------------------------------


def run_backend_batch(tiles, spec: BackendSpec, cls: str = "platform") -> list[BinaryMask]:
    """Run one batch of tiles through the backend; one mask per tile.

    Subprocess protocol, bit-exact:

    1. A directory ``<root>/batch-<uuid>/`` is created holding
       ``tiles/<index>.png`` (8-bit RGB) and ``batch.json``
       (``{"version": 1, "class": ..., "tiles": [...]}``).
    2. ``command --batch <dir>`` runs, bounded by the configured timeout.
    3. The backend writes ``masks/<index>.png`` (8-bit gray, 0
       background / 255 structure, same size) for every tile, then
       ``done.json`` with ``{"status": "ok"}``.
    4. Exit code 0 and status ok are required; anything else raises
       :class:`ProtocolError`.
    """
    tile_arrays = [_tile_array(t) for t in tiles]
    if spec.kind == "in-process-baseline":
        return [baseline_segment(a) for a in tile_arrays]
    if not tile_arrays:
        return []

    root = Path(spec.batch_root) if spec.batch_root else Path(tempfile.gettempdir())
    root.mkdir(parents=True, exist_ok=True)
    batch_dir = root / f"batch-{uuid.uuid4()}"
    (batch_dir / "tiles").mkdir(parents=True)
    try:
        rel_paths = []
        for i, arr in enumerate(tile_arrays):
            rel = f"tiles/{i}.png"
            write_image(arr, batch_dir / rel)
            rel_paths.append(rel)
        (batch_dir / "batch.json").write_text(
            json.dumps({"version": 1, "class": cls, "tiles": rel_paths})
        )

        cmd = list(spec.command) + ["--batch", str(batch_dir)]
        try:
            proc = subprocess.run(cmd, capture_output=True, timeout=spec.timeout_s)
        except subprocess.TimeoutExpired as exc:
            raise ProtocolError(f"backend timed out after {spec.timeout_s}s: {cmd}") from exc
        except OSError as exc:
            raise ProtocolError(f"backend failed to launch: {cmd}: {exc}") from exc
        if proc.returncode != 0:
            tail = proc.stderr.decode(errors="replace")[-500:]
            raise ProtocolError(f"backend exited with code {proc.returncode}: {tail}")

        done_path = batch_dir / "done.json"
        if not done_path.exists():
            raise ProtocolError("backend wrote no done.json")
        done = json.loads(done_path.read_text())
        if done.get("status") != "ok":
            raise ProtocolError(f"backend reported status {done.get('status')!r}: {done.get('message')}")

        masks = []
        for i, arr in enumerate(tile_arrays):
            mask_path = batch_dir / "masks" / f"{i}.png"
            if not mask_path.exists():
                raise ProtocolError(f"backend wrote no mask for tile {i}")
            raw = read_image(mask_path)
            if raw.ndim != 2:
                raise ProtocolError(f"mask for tile {i} is not single-channel")
            if raw.shape != arr.shape[:2]:
                raise ProtocolError(
                    f"mask for tile {i} has shape {raw.shape}, expected {arr.shape[:2]}"
                )
            masks.append(BinaryMask.from_array(raw >= 128))
        return masks
    finally:
        shutil.rmtree(batch_dir, ignore_errors=True)


# ---------------------------------------------------------------------------
# Sliding-window orchestration
# ---------------------------------------------------------------------------


def _window_origins(extent: int, window: int, stride: int) -> list[int]:
    """Window start offsets at the given stride, last window flush with
    the far edge so every pixel is covered."""
    origins = list(range(0, extent - window + 1, stride))
    last = extent - window
    if origins[-1] != last:
        origins.append(last)
    return origins


def sliding_window_infer(image, backend: BackendSpec, config: InferenceConfig) -> BinaryMask:
    """Classify overlapping windows and OR the per-window masks.

    Images smaller than the window are zero-padded for the backend and
    the result is cropped back. The OR accumulation makes the result
    independent of window order, and denser strides can only add
    positives.
    """
    arr = _tile_array(image)
    h, w = arr.shape[:2]
    window = config.window
    pad_h = max(0, window - h)
    pad_w = max(0, window - w)
    padded = (
        np.pad(arr, ((0, pad_h), (0, pad_w), (0, 0))) if (pad_h or pad_w) else arr
    )
    ph, pw = padded.shape[:2]

    origins = [
        (row, col)
        for row in _window_origins(ph, window, config.stride)
        for col in _window_origins(pw, window, config.stride)
    ]
    tiles = [padded[r : r + window, c : c + window] for r, c in origins]
    try:
        masks = run_backend_batch(tiles, backend, cls=config.cls)
    except ProtocolError as exc:
        raise ProtocolError(f"{exc} (windows at stride {config.stride}: {origins[:4]}...)") from exc

    out = np.zeros((ph, pw), dtype=bool)
    for (r, c), mask in zip(origins, masks):
        out[r : r + window, c : c + window] |= mask.pixels
    return BinaryMask.from_array(out[:h, :w])


def downscale_mask_preserving_positive(mask: BinaryMask, factor: int = 2) -> BinaryMask:
    """Coarse pixel positive iff any fine pixel in its block is positive.

    Trailing rows/columns that do not fill a whole block still form
    (partial) blocks, so output dims are ceil(dim / factor).
    """
    if factor < 1 or int(factor) != factor:
        raise ValueError(f"factor must be an integer >= 1, got {factor}")
    factor = int(factor)
    if factor == 1:
        return mask
    pixels = mask.pixels
    h, w = pixels.shape
    out_h = -(-h // factor)
    out_w = -(-w // factor)
    padded = np.zeros((out_h * factor, out_w * factor), dtype=bool)
    padded[:h, :w] = pixels
    blocks = padded.reshape(out_h, factor, out_w, factor)
    return BinaryMask.from_array(blocks.any(axis=(1, 3)))


def multiscale_infer(
    image,
    backend: BackendSpec,
    config: InferenceConfig,
    fine_image=None,
) -> BinaryMask:
    """Native-scale pass OR a 2x magnified pass, merged positive-preserving.

    The magnified input defaults to a bilinear upscale of the composite
    image; pass ``fine_image`` to supply one derived differently (e.g.
    terrain recomputed from a resampled elevation grid).
    """
    arr = _tile_array(image)
    partial_masks = []
    for scale in sorted(set(config.scales)):
        if scale == 1:
            partial_masks.append(sliding_window_infer(arr, backend, config).pixels)
        else:
            fine = _tile_array(fine_image) if fine_image is not None else scale_image_anisotropic(arr, 2)
            fine_mask = sliding_window_infer(fine, backend, config)
            partial_masks.append(downscale_mask_preserving_positive(fine_mask, 2).pixels)
    out = partial_masks[0]
    for extra in partial_masks[1:]:
        out = out | extra
    return BinaryMask.from_array(out)
