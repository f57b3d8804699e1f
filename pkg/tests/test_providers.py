import numpy as np
import pytest

from canopy_fuse.ingest import ManifestEntry, Manifest, write_raster
from canopy_fuse.providers import (
    FileBackedProvider,
    HeuristicBaseline,
    MissingMaskError,
    heuristic_baseline,
    make_provider,
    provide,
)
from canopy_fuse.raster import MultiBandImage, NormalizedImage, SatelliteSource, ShapeError

from .helpers import make_meta

S2 = SatelliteSource.Sentinel2


def _normalized(value, shape=(4, 4), meta=None):
    meta = meta or make_meta(S2)
    data = np.empty((3, *shape), dtype=np.float32)
    data[:] = np.asarray(value, dtype=np.float32).reshape(-1, 1, 1)
    return NormalizedImage(data, meta)


def _file_provider(tmp_path, probs, meta):
    path = tmp_path / "mask.mebf"
    write_raster(MultiBandImage(np.asarray(probs, dtype=np.float32)[None]), path)
    entry = ManifestEntry(path, meta.source, meta.lat, meta.lon, meta.year, meta.month, "prob_mask", meta.view)
    return FileBackedProvider(Manifest((entry,)))


def test_file_backed_passthrough(tmp_path):
    meta = make_meta(S2)
    provider = _file_provider(tmp_path, np.full((4, 4), 0.7), meta)
    mask = provide(_normalized(0.2, meta=meta), provider)
    assert np.array_equal(mask.probs, np.full((4, 4), 0.7, dtype=np.float32))
    assert mask.meta == meta


def test_file_backed_ignores_pixels(tmp_path, rng):
    meta = make_meta(S2)
    provider = _file_provider(tmp_path, rng.uniform(size=(4, 4)), meta)
    a = provide(_normalized(0.0, meta=meta), provider)
    b = provide(NormalizedImage(rng.uniform(size=(3, 4, 4)), meta), provider)
    assert a.probs.tobytes() == b.probs.tobytes()


def test_file_backed_missing_entry(tmp_path):
    provider = _file_provider(tmp_path, np.zeros((4, 4)), make_meta(S2))
    other = make_meta(S2, month=7)
    with pytest.raises(MissingMaskError):
        provider.provide(_normalized(0.0, meta=other))


def test_file_backed_matches_view(tmp_path):
    provider = _file_provider(tmp_path, np.zeros((4, 4)), make_meta(S2, view=1))
    assert make_meta(S2, view=1) in provider
    assert make_meta(S2, view=0) not in provider


def test_file_backed_shape_mismatch(tmp_path):
    meta = make_meta(S2)
    provider = _file_provider(tmp_path, np.zeros((5, 5)), meta)
    with pytest.raises(ShapeError):
        provider.provide(_normalized(0.0, meta=meta))


@pytest.mark.parametrize(
    "pixel, expected",
    [((0, 0, 0), 0.0), ((1, 1, 1), 1.0), ((0.3, 0.6, 0.9), 0.6)],
)
def test_heuristic_brightness(pixel, expected):
    mask = heuristic_baseline(_normalized(pixel))
    np.testing.assert_allclose(mask.probs, expected, atol=1e-7)


def test_heuristic_deterministic(rng):
    img = NormalizedImage(rng.uniform(size=(3, 6, 6)), make_meta(S2))
    a, b = provide(img, HeuristicBaseline()), provide(img, HeuristicBaseline())
    assert a.probs.tobytes() == b.probs.tobytes()
    assert ((a.probs >= 0) & (a.probs <= 1)).all()


def test_make_provider_kinds():
    assert isinstance(make_provider("heuristic", Manifest()), HeuristicBaseline)
    assert make_provider("oracle", Manifest()).kind == "oracle"
    with pytest.raises(ValueError):
        make_provider("mask2former", Manifest())
