"""Subprocess side of the tile-batch segmentation protocol.

Invocation: ``segadapter --batch <dir> [--mock] [--model mod:fn]
[--threshold T]``. The batch directory contains ``batch.json``
(``{"version": 1, "class": ..., "tiles": [...]}``) and the referenced
8-bit RGB tiles. The adapter writes one ``masks/<index>.png`` per tile
(8-bit gray, 0 background / 255 structure, same size, same index), then
``done.json`` with ``{"status": "ok"}`` — or ``{"status": "error",
"message": ...}`` plus a nonzero exit on any failure. done.json is
written last, atomically, so the orchestrator never observes a partial
batch as finished.

Mock mode answers "green channel >= 128" exactly and is bit-determinate
across runs and platforms, which makes it usable for protocol tests
without any model weights. A real model plugs in as ``--model
module:callable`` where the callable maps a (H, W, 3) float array in
[0, 1] to per-pixel scores in [0, 1].

This file is deliberately self-contained (stdlib + numpy + Pillow) so
it can also run straight from a checkout: ``python adapter.py --batch
<dir> --mock``.
"""

from __future__ import annotations

import argparse
import importlib
import json
import os
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

PROTOCOL_VERSION = 1


@dataclass(frozen=True)
class AdapterConfig:
    model_source: str = ""  # "module:callable" import path
    threshold: float = 0.5
    device: str = "cpu"  # hint forwarded to the model plugin
    mock: bool = False

    def __post_init__(self) -> None:
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError(f"threshold must be in [0, 1], got {self.threshold}")


def binarize(scores: np.ndarray, threshold: float) -> np.ndarray:
    """Per-pixel score >= threshold, after validating the score range."""
    arr = np.asarray(scores, dtype=np.float64)
    if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
        raise ValueError("model scores must lie in [0, 1]")
    return arr >= threshold


def mock_segment(tile: np.ndarray) -> np.ndarray:
    """Protocol-test rule: positive wherever the green channel is >= 128."""
    return tile[..., 1] >= 128


def _load_model(config: AdapterConfig):
    if ":" not in config.model_source:
        raise ValueError(
            f"model source {config.model_source!r} is not of the form module:callable"
        )
    module_name, attr = config.model_source.split(":", 1)
    module = importlib.import_module(module_name)
    fn = getattr(module, attr)

    def segment(tile: np.ndarray) -> np.ndarray:
        scores = np.asarray(fn(tile.astype(np.float64) / 255.0, device=config.device))
        if scores.shape != tile.shape[:2]:
            raise ValueError(f"model returned shape {scores.shape}, expected {tile.shape[:2]}")
        return binarize(scores, config.threshold)

    return segment


def _atomic_write_json(path: Path, payload: dict) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".done-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            json.dump(payload, fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def run_batch(batch_dir: str | os.PathLike, config: AdapterConfig = AdapterConfig(mock=True)) -> int:
    """Process one batch directory; returns the process exit code.

    Tiles are processed in manifest order and never reordered: mask
    index i always answers tile index i.
    """
    root = Path(batch_dir)

    def fail(message: str) -> int:
        _atomic_write_json(root / "done.json", {"status": "error", "message": message})
        return 1

    if not root.is_dir():
        print(f"batch directory {root} does not exist", file=sys.stderr)
        return 1
    manifest_path = root / "batch.json"
    if not manifest_path.exists():
        return fail("batch.json missing")
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        return fail(f"batch.json unparsable: {exc}")
    version = manifest.get("version")
    if version != PROTOCOL_VERSION:
        return fail(f"unsupported batch version {version!r}, expected {PROTOCOL_VERSION}")
    tiles = manifest.get("tiles")
    if not isinstance(tiles, list):
        return fail("batch.json has no tile list")

    try:
        segment = mock_segment if config.mock else _load_model(config)
    except Exception as exc:  # noqa: BLE001 - reported through the protocol
        return fail(f"model load failed: {exc}")

    masks_dir = root / "masks"
    masks_dir.mkdir(exist_ok=True)
    try:
        for index, rel in enumerate(tiles):
            with Image.open(root / rel) as img:
                if img.mode != "RGB":
                    return fail(f"tile {index} is {img.mode}, expected 8-bit RGB")
                tile = np.asarray(img, dtype=np.uint8)
            mask = segment(tile)
            out = np.where(mask, 255, 0).astype(np.uint8)
            Image.fromarray(out, mode="L").save(masks_dir / f"{index}.png", format="PNG")
    except Exception as exc:  # noqa: BLE001
        return fail(f"tile processing failed: {exc}")

    _atomic_write_json(root / "done.json", {"status": "ok"})
    return 0


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(
        prog="segadapter", description="Tile-batch segmentation adapter."
    )
    parser.add_argument("--batch", required=True, help="batch directory to process")
    parser.add_argument("--mock", action="store_true", help="use the deterministic mock rule")
    parser.add_argument("--model", default="", help="model plugin as module:callable")
    parser.add_argument("--threshold", type=float, default=0.5, help="mask binarization threshold")
    parser.add_argument("--device", default="cpu", help="device hint passed to the model plugin")
    args = parser.parse_args(argv)
    config = AdapterConfig(
        model_source=args.model, threshold=args.threshold, device=args.device, mock=args.mock
    )
    sys.exit(run_batch(args.batch, config))


if __name__ == "__main__":
    main()
