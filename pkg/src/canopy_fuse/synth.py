"""Synthetic multi-sensor scenes with known ground truth.

A scene is a set of regions observed monthly by Sentinel-1, Sentinel-2 and
Landsat-8. Cleared land grows as a union of axis-aligned rectangles, each at
least 3x3 and fully inside the frame, which makes the truth invariant under
opening with the default 3x3 element. For every image the generator also
writes the probability mask a segmentation model would have produced,
corrupted the ways real predictions go wrong: Gaussian noise, all-black
failures, and cloud cover read as clearing.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .ingest import (
    Manifest,
    ManifestEntry,
    QueryKey,
    default_band_names,
    read_raster,
    save_manifest,
    write_raster,
)
from .metrics import QueryScore, aggregate, confusion
from .providers import MissingMaskError
from .raster import BinaryMask, MultiBandImage, ProbMask, SatelliteSource

DEFAULT_SATELLITES = ("Sentinel1", "Sentinel2", "Landsat8")

# mean radiometry per class, in source units (8-bit-like counts / dB)
_OPTICAL_FOREST = np.array([40.0, 70.0, 35.0])
_OPTICAL_CLEARED = np.array([135.0, 110.0, 80.0])
_SAR_FOREST = np.array([-7.0, -13.0])
_SAR_CLEARED = np.array([-11.0, -19.0])

# region grid spans this box (degrees)
_LAT0, _LAT_SPAN = -3.33, 1.06
_LON0, _LON_SPAN = -54.48, 0.72

CLOUD_PROB = 0.85


@dataclass(frozen=True)
class SynthParams:
    seed: int = 0
    regions: int = 10
    months: int = 12
    views_per_month: int = 1
    blob_count: tuple[int, int] = (2, 4)
    noise_sigma: float = 0.1
    black_failure_rate: float = 0.1
    cloud_rate: float = 0.2
    deforestation_growth: float = 0.02
    size: int = 64
    start_year: int = 2020
    start_month: int = 1
    satellites: tuple[str, ...] = DEFAULT_SATELLITES
    missing_rate: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "blob_count", tuple(self.blob_count))
        object.__setattr__(self, "satellites", tuple(self.satellites))
        for name in ("black_failure_rate", "cloud_rate", "deforestation_growth", "missing_rate"):
            value = getattr(self, name)
            if not 0 <= value <= 1:
                raise ValueError(f"{name} must be in [0, 1], got {value}")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if self.regions < 0 or self.months < 0 or self.views_per_month < 1:
            raise ValueError("regions and months must be >= 0, views_per_month >= 1")
        lo, hi = self.blob_count
        if not 0 <= lo <= hi:
            raise ValueError(f"bad blob_count range {self.blob_count}")
        if self.size < 8:
            raise ValueError("size must be at least 8")
        if not 1 <= self.start_month <= 12:
            raise ValueError("start_month must be in 1..12")
        for name in self.satellites:
            SatelliteSource.parse(name)


@dataclass
class SynthScene:
    manifest: Manifest
    truth: dict[QueryKey, np.ndarray]
    log: list[dict] = field(default_factory=list)

    @property
    def clouded(self) -> list[dict]:
        return [row for row in self.log if row["clouded"]]


def region_coords(index: int, regions: int) -> tuple[float, float]:
    cols = max(1, math.ceil(math.sqrt(regions)))
    row, col = divmod(index, cols)
    lat = _LAT0 - _LAT_SPAN * row / cols
    lon = _LON0 - _LON_SPAN * col / cols
    return round(lat, 5), round(lon, 5)


def _random_rect(rng, size, anchor=None, lo=3, hi=None):
    hi = hi or max(lo, size // 6)
    h, w = rng.integers(lo, hi + 1, size=2)
    if anchor is None:
        y, x = rng.integers(0, size - h + 1), rng.integers(0, size - w + 1)
    else:
        y = int(np.clip(anchor[0] - h // 2, 0, size - h))
        x = int(np.clip(anchor[1] - w // 2, 0, size - w))
    return int(y), int(x), int(h), int(w)


def _truth_series(rng, params: SynthParams) -> list[np.ndarray]:
    size = params.size
    gt = np.zeros((size, size), dtype=bool)
    cursors = []
    for _ in range(rng.integers(params.blob_count[0], params.blob_count[1] + 1)):
        y, x, h, w = _random_rect(rng, size, lo=4, hi=max(4, size // 4))
        gt[y : y + h, x : x + w] = True
        cursors.append([y + h // 2, x + w // 2])

    series = []
    target = int(round(params.deforestation_growth * size * size))
    for month in range(params.months):
        if month > 0 and cursors and target > 0:
            grown = 0
            for _ in range(50):
                if grown >= target:
                    break
                cur = cursors[rng.integers(len(cursors))]
                cur[0] = int(np.clip(cur[0] + rng.integers(-3, 4), 0, size - 1))
                cur[1] = int(np.clip(cur[1] + rng.integers(-3, 4), 0, size - 1))
                y, x, h, w = _random_rect(rng, size, anchor=cur)
                before = np.count_nonzero(gt)
                gt[y : y + h, x : x + w] = True
                grown += np.count_nonzero(gt) - before
        series.append(gt.copy())
    return series


def _render_image(rng, source: SatelliteSource, gt: np.ndarray, cloud_rows) -> MultiBandImage:
    size = gt.shape[0]
    bands = source.band_count
    names = default_band_names(source, bands)
    if source.is_sar:
        means = np.where(gt[None], _SAR_CLEARED[:, None, None], _SAR_FOREST[:, None, None])
        data = means + rng.normal(0.0, 1.0, size=means.shape)
        return MultiBandImage(data.astype(np.float32))

    data = rng.uniform(20.0, 120.0, size=(bands, size, size))
    rgb = np.where(gt[None], _OPTICAL_CLEARED[:, None, None], _OPTICAL_FOREST[:, None, None])
    rgb = np.clip(rgb + rng.normal(0.0, 8.0, size=rgb.shape), 0.0, 150.0)
    for plane, name in zip(rgb, ("B4", "B3", "B2")):
        data[names.index(name)] = plane
    if cloud_rows is not None:
        start, count = cloud_rows
        rows = (np.arange(count) + start) % size
        data[:, rows, :] = rng.uniform(180.0, 255.0, size=(bands, count, size))
    return MultiBandImage(data.astype(np.float32))


def _render_mask(rng, gt: np.ndarray, params: SynthParams, cloud_rows, black: bool) -> np.ndarray:
    if black:
        return np.zeros(gt.shape, dtype=np.float32)
    probs = gt.astype(np.float64)
    if cloud_rows is not None:
        start, count = cloud_rows
        rows = (np.arange(count) + start) % gt.shape[0]
        probs[rows, :] = CLOUD_PROB
    if params.noise_sigma > 0:
        probs = probs + rng.normal(0.0, params.noise_sigma, size=probs.shape)
    return np.clip(probs, 0.0, 1.0).astype(np.float32)


def generate_scene(params: SynthParams, out_dir) -> SynthScene:
    """Write imagery, probability masks, labels and a manifest under ``out_dir``.

    Layout: ``manifest.json``, ``imagery/``, ``masks/``, ``gt/`` and
    ``synth_log.json`` (one row per view recording which corruptions were
    applied).
    """
    out = Path(out_dir)
    for sub in ("imagery", "masks", "gt"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(params.seed)
    sources = [SatelliteSource.parse(s) for s in params.satellites]

    entries, truth, log = [], {}, []
    for region in range(params.regions):
        lat, lon = region_coords(region, params.regions)
        series = _truth_series(rng, params)
        for t, gt in enumerate(series):
            year, month0 = divmod(params.start_year * 12 + params.start_month - 1 + t, 12)
            month = month0 + 1
            key = QueryKey(lat, lon, year, month)
            truth[key] = gt
            stem = f"r{region:03d}_{year:04d}{month:02d}"

            gt_path = out / "gt" / f"{stem}.mebf"
            write_raster(MultiBandImage(gt[None].astype(np.float32)), gt_path)
            entries.append(ManifestEntry(gt_path, None, lat, lon, year, month, "label"))

            for source in sources:
                for view in range(params.views_per_month):
                    if params.missing_rate and rng.random() < params.missing_rate:
                        continue
                    clouded = (not source.is_sar) and rng.random() < params.cloud_rate
                    cloud_rows = None
                    if clouded:
                        frac = rng.uniform(0.6, 0.95)
                        count = math.ceil(frac * params.size)
                        cloud_rows = (int(rng.integers(params.size)), count)
                    black = rng.random() < params.black_failure_rate

                    name = f"{stem}_{source.value}_v{view}.mebf"
                    img_path, mask_path = out / "imagery" / name, out / "masks" / name
                    write_raster(_render_image(rng, source, gt, cloud_rows), img_path)
                    probs = _render_mask(rng, gt, params, cloud_rows, black)
                    write_raster(MultiBandImage(probs[None]), mask_path)

                    entries.append(ManifestEntry(img_path, source, lat, lon, year, month, "imagery", view))
                    entries.append(ManifestEntry(mask_path, source, lat, lon, year, month, "prob_mask", view))
                    log.append({
                        "image": img_path.relative_to(out).as_posix(),
                        "source": source.value,
                        "lat": lat,
                        "lon": lon,
                        "year": year,
                        "month": month,
                        "view": view,
                        "clouded": clouded,
                        "black_failure": black,
                    })

    manifest = Manifest(tuple(entries))
    save_manifest(manifest, out / "manifest.json")
    doc = {"params": asdict(params), "views": log}
    (out / "synth_log.json").write_text(json.dumps(doc, indent=1) + "\n")
    return SynthScene(manifest, truth, log)


class SyntheticOracle:
    """Provider that answers with the ground-truth label of the image's month."""

    kind = "oracle"

    def __init__(self, manifest: Manifest):
        self._labels = {e.key: e for e in manifest.of_kind("label")}

    def provide(self, img) -> ProbMask:
        meta = img.meta
        key = QueryKey(meta.lat, meta.lon, meta.year, meta.month)
        if key not in self._labels:
            raise MissingMaskError(f"no label for {key}")
        raster = read_raster(self._labels[key].path)
        return ProbMask(raster.samples[0], meta)


def oracle_evaluate(predictions: dict, truth: dict):
    """Score predicted masks against the generator's truth, keyed by query."""
    if set(predictions) != set(truth):
        missing = sorted(map(str, set(truth) - set(predictions)))
        extra = sorted(map(str, set(predictions) - set(truth)))
        raise ValueError(f"query keys differ: missing {missing}, unexpected {extra}")
    scores = []
    for key in sorted(truth, key=lambda k: (k.lat, k.lon, k.year, k.month)):
        pred, gt = predictions[key], truth[key]
        pred = getattr(pred, "bits", pred)
        gt = getattr(gt, "bits", gt)
        scores.append(QueryScore(str(key), confusion(BinaryMask(pred), BinaryMask(gt))))
    return aggregate(scores)
