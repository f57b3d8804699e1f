import json

import numpy as np
import pytest

from canopy_fuse.cloud import CloudRule, screen_clouds
from canopy_fuse.ingest import load_manifest, read_raster
from canopy_fuse.morphology import opening
from canopy_fuse.preprocess import select_bands
from canopy_fuse.raster import BinaryMask
from canopy_fuse.synth import SynthParams, SyntheticOracle, generate_scene, oracle_evaluate

from .helpers import make_meta

CLEAN = dict(noise_sigma=0.0, black_failure_rate=0.0, cloud_rate=0.0)


def _tree(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_clean_masks_binarise_to_truth(tmp_path):
    scene = generate_scene(SynthParams(seed=1, regions=2, months=3, **CLEAN), tmp_path)
    for entry in scene.manifest.of_kind("prob_mask"):
        probs = read_raster(entry.path).samples[0]
        assert np.array_equal(probs > 0.5, scene.truth[entry.key])


def test_same_seed_is_byte_identical(tmp_path):
    params = SynthParams(seed=42, regions=2, months=3)
    generate_scene(params, tmp_path / "a")
    generate_scene(params, tmp_path / "b")
    assert _tree(tmp_path / "a") == _tree(tmp_path / "b")


def test_different_seed_differs(tmp_path):
    generate_scene(SynthParams(seed=1, regions=1, months=2), tmp_path / "a")
    generate_scene(SynthParams(seed=2, regions=1, months=2), tmp_path / "b")
    assert _tree(tmp_path / "a") != _tree(tmp_path / "b")


def test_all_black_failures(tmp_path):
    scene = generate_scene(SynthParams(seed=3, regions=1, months=2, black_failure_rate=1.0), tmp_path)
    for entry in scene.manifest.of_kind("prob_mask"):
        assert not read_raster(entry.path).samples.any()


def test_truth_grows_monotonically(tmp_path):
    scene = generate_scene(SynthParams(seed=5, regions=3, months=6, deforestation_growth=0.05), tmp_path)
    keys = sorted(scene.truth, key=lambda k: (k.lat, k.lon, k.year, k.month))
    for prev, cur in zip(keys, keys[1:]):
        if (prev.lat, prev.lon) == (cur.lat, cur.lon):
            assert not (scene.truth[prev] & ~scene.truth[cur]).any()
    assert any(scene.truth[a].sum() < scene.truth[b].sum() for a, b in zip(keys, keys[1:]))


def test_truth_is_opening_invariant(tmp_path):
    scene = generate_scene(SynthParams(seed=9, regions=4, months=4), tmp_path)
    for gt in scene.truth.values():
        assert np.array_equal(opening(BinaryMask(gt)).bits, gt)


def test_cloud_images_always_screened(tmp_path):
    scene = generate_scene(SynthParams(seed=11, regions=3, months=4, cloud_rate=0.5), tmp_path)
    images = {e.path.relative_to(tmp_path).as_posix(): e for e in scene.manifest.of_kind("imagery")}
    assert scene.clouded
    for row in scene.log:
        img = select_bands(images[row["image"]].load())
        kept = screen_clouds([(img, None)], CloudRule())
        assert (not kept) == row["clouded"]
        if row["source"] == "Sentinel1":
            assert kept


def test_entry_counts(tmp_path):
    p = SynthParams(seed=0, regions=2, months=3, views_per_month=2)
    scene = generate_scene(p, tmp_path)
    sats = len(p.satellites)
    views = p.regions * p.months * p.views_per_month * sats
    assert len(scene.manifest.of_kind("imagery")) == views
    assert len(scene.manifest.of_kind("prob_mask")) == views
    assert len(scene.manifest.of_kind("label")) == p.regions * p.months
    assert len(load_manifest(tmp_path / "manifest.json").entries) == 2 * views + p.regions * p.months


def test_missing_views(tmp_path):
    scene = generate_scene(SynthParams(seed=0, regions=3, months=4, missing_rate=0.5), tmp_path)
    assert len(scene.manifest.of_kind("imagery")) < 3 * 4 * 3
    assert len(scene.manifest.of_kind("label")) == 3 * 4


def test_zero_regions(tmp_path):
    scene = generate_scene(SynthParams(regions=0), tmp_path)
    assert scene.manifest.entries == ()
    assert json.loads((tmp_path / "manifest.json").read_text()) == {"version": 1, "entries": []}


def test_year_rollover(tmp_path):
    scene = generate_scene(SynthParams(regions=1, months=3, start_year=2020, start_month=12), tmp_path)
    assert sorted((k.year, k.month) for k in scene.truth) == [(2020, 12), (2021, 1), (2021, 2)]


@pytest.mark.parametrize(
    "kwargs", [{"cloud_rate": 1.5}, {"noise_sigma": -1}, {"views_per_month": 0}, {"satellites": ("Sentinel3",)}]
)
def test_param_validation(kwargs):
    with pytest.raises(ValueError):
        SynthParams(**kwargs)


def test_oracle_provider_returns_truth(tmp_path):
    scene = generate_scene(SynthParams(seed=2, regions=1, months=2), tmp_path)
    provider = SyntheticOracle(scene.manifest)
    key = next(iter(scene.truth))
    meta = make_meta(lat=key.lat, lon=key.lon, year=key.year, month=key.month)

    class _Img:
        pass

    img = _Img()
    img.meta = meta
    mask = provider.provide(img)
    assert np.array_equal(mask.probs > 0.5, scene.truth[key])


def test_oracle_evaluate(tmp_path):
    scene = generate_scene(SynthParams(seed=2, regions=2, months=2), tmp_path)
    truth = scene.truth
    assert oracle_evaluate(dict(truth), truth).iou == 1.0
    flipped = {k: ~v for k, v in truth.items()}
    assert oracle_evaluate(flipped, truth).iou == 0.0
    with pytest.raises(ValueError):
        oracle_evaluate({}, truth)
