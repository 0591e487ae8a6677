from __future__ import annotations

import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from segadapter.adapter import AdapterConfig, binarize, mock_segment, run_batch

ADAPTER = Path(__file__).resolve().parent.parent / "src" / "segadapter" / "adapter.py"


def make_batch(root: Path, tiles, version=1, cls="platform") -> Path:
    batch = root / "batch"
    (batch / "tiles").mkdir(parents=True)
    rels = []
    for i, tile in enumerate(tiles):
        rel = f"tiles/{i}.png"
        Image.fromarray(tile, mode="RGB").save(batch / rel)
        rels.append(rel)
    (batch / "batch.json").write_text(json.dumps({"version": version, "class": cls, "tiles": rels}))
    return batch


def tile_with_green(value, size=64):
    tile = np.zeros((size, size, 3), dtype=np.uint8)
    tile[..., 1] = value
    return tile


class TestBinarize:
    def test_threshold_is_inclusive(self):
        scores = np.array([[0.5, 0.49]])
        out = binarize(scores, 0.5)
        assert out[0, 0] and not out[0, 1]

    def test_threshold_one_keeps_only_exact_ones(self):
        scores = np.array([[1.0, 0.999999]])
        out = binarize(scores, 1.0)
        assert out[0, 0] and not out[0, 1]

    def test_all_zero_scores_empty(self):
        assert not binarize(np.zeros((4, 4)), 0.5).any()

    def test_out_of_range_scores_rejected(self):
        with pytest.raises(ValueError, match=r"\[0, 1\]"):
            binarize(np.array([[1.5]]), 0.5)

    def test_config_threshold_validated(self):
        with pytest.raises(ValueError, match="threshold"):
            AdapterConfig(threshold=1.5)


class TestMockMode:
    def test_green_200_all_positive(self, tmp_path):
        batch = make_batch(tmp_path, [tile_with_green(200)])
        assert run_batch(batch, AdapterConfig(mock=True)) == 0
        mask = np.asarray(Image.open(batch / "masks" / "0.png"))
        assert (mask == 255).all()

    def test_green_0_all_negative(self, tmp_path):
        batch = make_batch(tmp_path, [tile_with_green(0)])
        assert run_batch(batch, AdapterConfig(mock=True)) == 0
        mask = np.asarray(Image.open(batch / "masks" / "0.png"))
        assert (mask == 0).all()

    def test_rule_is_exact_at_128(self, tmp_path):
        tile = tile_with_green(127)
        tile[10:20, 10:20, 1] = 128
        batch = make_batch(tmp_path, [tile])
        assert run_batch(batch, AdapterConfig(mock=True)) == 0
        mask = np.asarray(Image.open(batch / "masks" / "0.png"))
        assert np.array_equal(mask == 255, tile[..., 1] >= 128)

    def test_one_mask_per_tile_in_order(self, tmp_path, rng=np.random.default_rng(4)):
        tiles = [rng.integers(0, 256, size=(32, 48, 3), dtype=np.uint8) for _ in range(4)]
        batch = make_batch(tmp_path, tiles)
        assert run_batch(batch, AdapterConfig(mock=True)) == 0
        done = json.loads((batch / "done.json").read_text())
        assert done == {"status": "ok"}
        for i, tile in enumerate(tiles):
            mask = np.asarray(Image.open(batch / "masks" / f"{i}.png"))
            assert mask.shape == tile.shape[:2]
            assert np.array_equal(mask == 255, mock_segment(tile))

    def test_bit_deterministic_across_runs(self, tmp_path):
        rng = np.random.default_rng(9)
        tiles = [rng.integers(0, 256, size=(64, 64, 3), dtype=np.uint8)]
        b1 = make_batch(tmp_path / "a", tiles)
        b2 = make_batch(tmp_path / "b", tiles)
        assert run_batch(b1, AdapterConfig(mock=True)) == 0
        assert run_batch(b2, AdapterConfig(mock=True)) == 0
        assert (b1 / "masks" / "0.png").read_bytes() == (b2 / "masks" / "0.png").read_bytes()


class TestProtocolErrors:
    def test_unsupported_version(self, tmp_path):
        batch = make_batch(tmp_path, [tile_with_green(200)], version=2)
        assert run_batch(batch, AdapterConfig(mock=True)) != 0
        done = json.loads((batch / "done.json").read_text())
        assert done["status"] == "error"
        assert "version" in done["message"]

    def test_missing_batch_json(self, tmp_path):
        batch = tmp_path / "empty"
        batch.mkdir()
        assert run_batch(batch, AdapterConfig(mock=True)) != 0
        assert json.loads((batch / "done.json").read_text())["status"] == "error"

    def test_unparsable_batch_json(self, tmp_path):
        batch = tmp_path / "garbled"
        batch.mkdir()
        (batch / "batch.json").write_text("{not json")
        assert run_batch(batch, AdapterConfig(mock=True)) != 0
        assert "unparsable" in json.loads((batch / "done.json").read_text())["message"]

    def test_missing_tile_reports_error_status(self, tmp_path):
        batch = make_batch(tmp_path, [tile_with_green(200)])
        (batch / "tiles" / "0.png").unlink()
        assert run_batch(batch, AdapterConfig(mock=True)) != 0
        done = json.loads((batch / "done.json").read_text())
        assert done["status"] == "error"

    def test_model_mode_without_plugin_fails_cleanly(self, tmp_path):
        batch = make_batch(tmp_path, [tile_with_green(200)])
        code = run_batch(batch, AdapterConfig(model_source="no_such_module:fn"))
        assert code != 0
        assert "model load failed" in json.loads((batch / "done.json").read_text())["message"]


class TestModelPlugin:
    def test_plugin_scores_binarized_at_threshold(self, tmp_path, monkeypatch):
        plugin = tmp_path / "fake_model.py"
        plugin.write_text(
            "def predict(tile, device='cpu'):\n"
            "    return tile[..., 0]  # red channel, already in [0, 1]\n"
        )
        monkeypatch.syspath_prepend(str(tmp_path))
        tile = np.zeros((32, 32, 3), dtype=np.uint8)
        tile[:16, :, 0] = 255
        tile[16:, :, 0] = 100  # 100/255 = 0.39 < 0.5
        batch = make_batch(tmp_path, [tile])
        config = AdapterConfig(model_source="fake_model:predict", threshold=0.5)
        assert run_batch(batch, config) == 0
        mask = np.asarray(Image.open(batch / "masks" / "0.png"))
        assert (mask[:16] == 255).all() and (mask[16:] == 0).all()


class TestCommandLine:
    def test_cli_round_trip(self, tmp_path):
        batch = make_batch(tmp_path, [tile_with_green(200)])
        proc = subprocess.run(
            [sys.executable, str(ADAPTER), "--batch", str(batch), "--mock"],
            capture_output=True,
            timeout=120,
        )
        assert proc.returncode == 0
        assert json.loads((batch / "done.json").read_text()) == {"status": "ok"}

    def test_cli_nonzero_exit_on_bad_version(self, tmp_path):
        batch = make_batch(tmp_path, [tile_with_green(200)], version=3)
        proc = subprocess.run(
            [sys.executable, str(ADAPTER), "--batch", str(batch), "--mock"],
            capture_output=True,
            timeout=120,
        )
        assert proc.returncode != 0
