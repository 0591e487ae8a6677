from __future__ import annotations

import hashlib
import json
from pathlib import Path

import pytest

from reliefseg.cli import run
from reliefseg.grid import dump_ascii_grid
from reliefseg.labels import dump_geojson_labels
from reliefseg.synthetic import SceneSpec, make_structure_scene


@pytest.fixture(scope="module")
def scene_files(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli_scene")
    grid, labels = make_structure_scene(SceneSpec(size_px=320, n_mesas=3, n_rings=2, seed=3))
    dtm = root / "site.asc"
    dtm.write_text(dump_ascii_grid(grid))
    gt = root / "gt.geojson"
    gt.write_text(dump_geojson_labels(labels))
    return {"dtm": dtm, "gt": gt, "root": root, "grid": grid, "labels": labels}


def tree_digest(path: Path) -> dict[str, str]:
    return {
        str(p.relative_to(path)): hashlib.sha256(p.read_bytes()).hexdigest()
        for p in sorted(path.rglob("*"))
        if p.is_file()
    }


class TestUsage:
    def test_unknown_flag_exits_2(self, capsys):
        assert run(["viz", "--xyz"]) == 2

    def test_unknown_subcommand_exits_2(self):
        assert run(["frobnicate"]) == 2

    FLAGS = {
        "viz": ["--dtm", "--out", "--repr"],
        "dataset": ["--dtm", "--labels", "--out", "--class", "--variants", "--scales",
                    "--backgrounds", "--tile-size", "--seed", "--rederive-terrain"],
        "infer": ["--dtm", "--out", "--class", "--repr", "--stride", "--scales",
                  "--backend-cmd", "--timeout-s", "--min-bbox-px", "--rederive-terrain"],
        "eval": ["--pred", "--gt", "--report", "--cell-size"],
        "ablate": ["--dtm", "--labels", "--out", "--class", "--representations",
                   "--stride", "--scales", "--min-bbox-px"],
    }

    def test_help_exits_0_and_documents_every_flag(self, capsys):
        assert run(["--help"]) == 0
        common = ["--config", "--directions", "--radius-m", "--azimuth", "--altitude"]
        for sub, flags in self.FLAGS.items():
            assert run([sub, "--help"]) == 0
            out = capsys.readouterr().out
            for flag in flags + common:
                assert flag in out, f"{sub} --help missing {flag}"

    def test_runtime_error_exits_1(self, tmp_path, capsys):
        assert run(["viz", "--dtm", str(tmp_path / "missing.asc"), "--out", str(tmp_path)]) == 1
        assert "error:" in capsys.readouterr().err


class TestViz:
    def test_writes_requested_representation(self, scene_files, tmp_path):
        out = tmp_path / "viz"
        assert run(["viz", "--dtm", str(scene_files["dtm"]), "--out", str(out), "--repr", "sps"]) == 0
        assert (out / "sps.png").exists()

    def test_all_representations(self, scene_files, tmp_path):
        out = tmp_path / "viz_all"
        assert run(["viz", "--dtm", str(scene_files["dtm"]), "--out", str(out)]) == 0
        for name in ("sps", "svf", "po", "slope", "hs", "elevation"):
            assert (out / f"{name}.png").exists()

    def test_deterministic(self, scene_files, tmp_path):
        out1, out2 = tmp_path / "v1", tmp_path / "v2"
        for out in (out1, out2):
            assert run(["viz", "--dtm", str(scene_files["dtm"]), "--out", str(out), "--repr", "slope"]) == 0
        assert tree_digest(out1) == tree_digest(out2)


@pytest.fixture(scope="module")
def inferred(scene_files, tmp_path_factory):
    out = tmp_path_factory.mktemp("infer")
    code = run(["infer", "--dtm", str(scene_files["dtm"]), "--out", str(out), "--class", "platform"])
    assert code == 0
    return out


class TestInferAndEval:
    def test_outputs_exist(self, inferred):
        assert (inferred / "mask.png").exists()
        assert (inferred / "pred.geojson").exists()
        assert (inferred / "infer.json").exists()

    def test_pred_geojson_has_class_and_area(self, inferred):
        doc = json.loads((inferred / "pred.geojson").read_text())
        assert doc["type"] == "FeatureCollection"
        assert doc["features"], "no predictions on the synthetic scene"
        props = doc["features"][0]["properties"]
        assert props["class"] == "platform"
        assert props["area_m2"] > 0

    def test_infer_provenance_records_defaults(self, inferred):
        prov = json.loads((inferred / "infer.json").read_text())
        assert prov["stride"] == 128
        assert prov["min_bbox_px"] == 15
        assert prov["n_directions"] == 16

    def test_eval_report_keys(self, scene_files, inferred, tmp_path):
        report_path = tmp_path / "report.json"
        code = run(
            [
                "eval",
                "--pred",
                str(inferred / "pred.geojson"),
                "--gt",
                str(scene_files["gt"]),
                "--report",
                str(report_path),
            ]
        )
        assert code == 0
        report = json.loads(report_path.read_text())
        assert {"iou", "precision", "recall", "topology", "quartiles"} <= set(report)
        assert report["schema"] == 1
        assert report["iou"] > 0.3

    def test_infer_deterministic(self, scene_files, inferred, tmp_path):
        out2 = tmp_path / "infer2"
        assert run(
            ["infer", "--dtm", str(scene_files["dtm"]), "--out", str(out2), "--class", "platform"]
        ) == 0
        assert tree_digest(out2) == tree_digest(inferred)


class TestDatasetCommand:
    def test_dataset_builds(self, scene_files, tmp_path):
        out = tmp_path / "ds"
        code = run(
            [
                "dataset",
                "--dtm",
                str(scene_files["dtm"]),
                "--labels",
                str(scene_files["gt"]),
                "--out",
                str(out),
                "--class",
                "platform",
                "--variants",
                "2",
                "--scales",
                "1",
                "--backgrounds",
                "1",
                "--tile-size",
                "128",
                "--seed",
                "5",
            ]
        )
        assert code == 0
        manifest = (out / "manifest.jsonl").read_text().splitlines()
        assert len(manifest) == 3 * 2 + 1
        first = json.loads(manifest[0])
        assert (out / first["image"]).exists()


class TestAblate:
    def test_ablation_summary(self, scene_files, tmp_path):
        out = tmp_path / "ablate"
        code = run(
            [
                "ablate",
                "--dtm",
                str(scene_files["dtm"]),
                "--labels",
                str(scene_files["gt"]),
                "--out",
                str(out),
                "--representations",
                "sps,slope,elevation",
                "--scales",
                "1",
            ]
        )
        assert code == 0
        summary = json.loads((out / "ablation.json").read_text())
        assert set(summary["results"]) == {"sps", "slope", "elevation"}
        for name in ("sps", "slope", "elevation"):
            assert (out / name / "report.json").exists()
            assert (out / name / f"{name}.png").exists()
        # slope-channel baseline sees structure in sps and slope images
        assert summary["results"]["sps"]["iou"] > 0.3

    def test_config_file_with_flag_override(self, scene_files, tmp_path):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"inference": {"stride": 256, "scales": [1]}}))
        out = tmp_path / "cfg_infer"
        code = run(
            [
                "infer",
                "--dtm",
                str(scene_files["dtm"]),
                "--out",
                str(out),
                "--config",
                str(config),
                "--stride",
                "128",
            ]
        )
        assert code == 0
        prov = json.loads((out / "infer.json").read_text())
        assert prov["stride"] == 128  # flag wins
        assert prov["scales"] == [1]  # config applies where no flag given
