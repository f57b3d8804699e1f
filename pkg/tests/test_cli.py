import csv
import json

import pytest
from click.testing import CliRunner

from canopy_fuse.cli import main


@pytest.fixture
def runner():
    return CliRunner()


def _synth(runner, out, *extra):
    result = runner.invoke(main, ["synth", "--out", str(out), "--regions", "2", "--months", "3", "--size", "32", *extra])
    assert result.exit_code == 0, result.output
    return out / "manifest.json"


def _tree(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_synth_is_reproducible(runner, tmp_path):
    _synth(runner, tmp_path / "a", "--seed", "42")
    _synth(runner, tmp_path / "b", "--seed", "42")
    assert _tree(tmp_path / "a") == _tree(tmp_path / "b")


def test_synth_zero_regions(runner, tmp_path):
    result = runner.invoke(main, ["synth", "--out", str(tmp_path), "--regions", "0"])
    assert result.exit_code == 0
    assert json.loads((tmp_path / "manifest.json").read_text())["entries"] == []


def test_synth_bad_params(runner, tmp_path):
    result = runner.invoke(main, ["synth", "--out", str(tmp_path), "--cloud-rate", "2"])
    assert result.exit_code == 2


def test_run_then_eval_clean(runner, tmp_path):
    manifest = _synth(runner, tmp_path / "s", "--noise-sigma", "0", "--black-failure-rate", "0", "--cloud-rate", "0")
    result = runner.invoke(main, ["run", "--manifest", str(manifest), "--out", str(tmp_path / "out")])
    assert result.exit_code == 0, result.output
    assert "6/6 queries fused" in result.output
    summary = json.loads((tmp_path / "out" / "summary.json").read_text())
    assert summary["images_removed_by_cloud_screen"] == 0

    result = runner.invoke(
        main, ["eval", "--pred", str(tmp_path / "out"), "--gt", str(manifest), "--report", str(tmp_path / "rep")]
    )
    assert result.exit_code == 0
    doc = json.loads(result.stdout)
    assert (doc["pixel_accuracy"], doc["f1"], doc["iou"]) == (1.0, 1.0, 1.0)
    assert "per_query" not in doc
    for name in ("metrics.json", "per_query.csv", "per_query_scores.png"):
        assert (tmp_path / "rep" / name).stat().st_size > 0
    with open(tmp_path / "rep" / "per_query.csv") as fh:
        assert len(list(csv.DictReader(fh))) == 6


def test_eval_flags_missing(runner, tmp_path):
    manifest = _synth(runner, tmp_path / "s")
    runner.invoke(main, ["run", "--manifest", str(manifest), "--out", str(tmp_path / "out")])
    next((tmp_path / "out").glob("pred_*.mebf")).unlink()
    result = runner.invoke(main, ["eval", "--pred", str(tmp_path / "out"), "--gt", str(manifest), "--per-query"])
    assert result.exit_code == 0
    doc = json.loads(result.stdout)
    assert len(doc["missing_predictions"]) == 1
    assert len(doc["per_query"]) == 6
    assert "no prediction" in result.stderr


def test_run_empty_manifest(runner, tmp_path):
    path = tmp_path / "m.json"
    path.write_text('{"version": 1, "entries": []}')
    result = runner.invoke(main, ["run", "--manifest", str(path), "--out", str(tmp_path / "out")])
    assert result.exit_code == 2
    assert "no entries" in result.stderr


@pytest.mark.parametrize("config", ['{"fusion": {"ensemble_threshold": 2}}', '{"bogus": 1}', "not json"])
def test_run_bad_config(runner, tmp_path, config):
    manifest = _synth(runner, tmp_path / "s")
    cfg = tmp_path / "c.json"
    cfg.write_text(config)
    result = runner.invoke(main, ["run", "--manifest", str(manifest), "--config", str(cfg), "--out", str(tmp_path / "o")])
    assert result.exit_code == 2


def test_run_missing_manifest(runner, tmp_path):
    result = runner.invoke(main, ["run", "--manifest", str(tmp_path / "nope.json"), "--out", str(tmp_path / "o")])
    assert result.exit_code == 2


def test_ablate_writes_table_and_figure(runner, tmp_path):
    manifest = _synth(runner, tmp_path / "s", "--cloud-rate", "0.4")
    result = runner.invoke(main, ["ablate", "--manifest", str(manifest), "--out", str(tmp_path / "abl")])
    assert result.exit_code == 0, result.output
    with open(tmp_path / "abl" / "ablation.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["method"] for r in rows] == ["original", "cloud_removal", "cloud_removal_adjacent_month"]
    assert (tmp_path / "abl" / "ablation.png").stat().st_size > 0
    assert json.loads((tmp_path / "abl" / "ablation.json").read_text())
    for r in rows:
        assert 0.0 <= float(r["pixel_accuracy"]) <= 1.0
    fused = [int(r["masks_used"]) + int(r["masks_removed_stage1"]) + int(r["masks_removed_stage2"]) for r in rows]
    assert fused[1] == fused[0] - int(rows[1]["images_removed_by_cloud_screen"]) < fused[0]
    assert int(rows[0]["images_removed_by_cloud_screen"]) == 0
