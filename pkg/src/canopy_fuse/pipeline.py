"""End-to-end runs over a manifest: fuse every query, write masks, score."""

from __future__ import annotations

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from functools import lru_cache
from pathlib import Path

import numpy as np

from .cloud import CloudRule
from .fusion import Candidate, FusionConfig, FuseStats, NoDataError, fuse_query
from .ingest import Manifest, ManifestEntry, QueryKey, group_by_query, read_raster, write_raster
from .metrics import QueryScore, aggregate, confusion
from .morphology import StructElement, opening
from .preprocess import ClipSpec
from .providers import PROVIDER_KINDS, make_provider
from .raster import BinaryMask, MultiBandImage, ProbMask, SatelliteSource

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    pass


DEFAULT_PROVIDERS = {"Sentinel1": "file", "Sentinel2": "file", "Landsat8": "file"}


@dataclass(frozen=True)
class PipelineConfig:
    clip: ClipSpec = ClipSpec()
    cloud: CloudRule = CloudRule()
    fusion: FusionConfig = FusionConfig()
    se: StructElement = StructElement()
    providers: tuple[tuple[str, str], ...] = tuple(DEFAULT_PROVIDERS.items())
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "providers", tuple(sorted(dict(self.providers).items())))

    @property
    def provider_map(self) -> dict[str, str]:
        return dict(self.providers)

    def to_json(self) -> dict:
        return {
            "clip": asdict(self.clip),
            "cloud": asdict(self.cloud),
            "fusion": asdict(self.fusion),
            "se": asdict(self.se),
            "providers": self.provider_map,
            "workers": self.workers,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "PipelineConfig":
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(doc) - {"clip", "cloud", "fusion", "se", "providers", "workers"}
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        try:
            clip = _section(ClipSpec, doc.get("clip", {}), "clip")
            cloud = _section(CloudRule, doc.get("cloud", {}), "cloud")
            fusion = _section(FusionConfig, doc.get("fusion", {}), "fusion")
            se = _section(StructElement, doc.get("se", {}), "se")
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None

        providers = doc.get("providers", DEFAULT_PROVIDERS)
        if not isinstance(providers, dict):
            raise ConfigError("'providers' must map satellite names to provider kinds")
        for name, kind in providers.items():
            try:
                SatelliteSource.parse(name)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
            if kind not in PROVIDER_KINDS:
                raise ConfigError(f"unknown provider kind {kind!r} for {name}")
        workers = doc.get("workers", 1)
        if not isinstance(workers, int) or isinstance(workers, bool) or workers < 1:
            raise ConfigError("'workers' must be a positive integer")
        return cls(clip, cloud, fusion, se, tuple(providers.items()), workers)


def _section(kind, raw, name):
    if not isinstance(raw, dict):
        raise ConfigError(f"config section {name!r} must be an object")
    allowed = {f.name for f in fields(kind)}
    unknown = set(raw) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {name!r}: {sorted(unknown)}")
    ints = {f.name for f in fields(kind) if f.type in ("int", int)}
    for key in ints & set(raw):
        if not isinstance(raw[key], int) or isinstance(raw[key], bool):
            raise ConfigError(f"{name}.{key} must be an integer")
    return kind(**raw)


def load_config(path) -> PipelineConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return PipelineConfig.from_json(doc)


@dataclass
class QueryOutcome:
    key: QueryKey
    bits: np.ndarray | None
    stats: FuseStats
    error: str | None = None


@dataclass
class RunSummary:
    queries: int = 0
    processed: int = 0
    no_data: list = field(default_factory=list)
    cloud_removed_images: list = field(default_factory=list)
    stage1_removed: int = 0
    stage2_removed: int = 0
    masks_used: int = 0
    candidates: int = 0

    def to_json(self) -> dict:
        return {
            "queries": self.queries,
            "processed": self.processed,
            "no_data_queries": len(self.no_data),
            "no_data": self.no_data,
            "images_removed_by_cloud_screen": len(self.cloud_removed_images),
            "cloud_removed_images": self.cloud_removed_images,
            "candidate_masks": self.candidates,
            "masks_removed_stage1": self.stage1_removed,
            "masks_removed_stage2": self.stage2_removed,
            "masks_used": self.masks_used,
        }


@lru_cache(maxsize=512)
def _load_image(entry: ManifestEntry) -> MultiBandImage:
    return entry.load()


@lru_cache(maxsize=512)
def _load_mask(entry: ManifestEntry) -> ProbMask:
    raster = read_raster(entry.path)
    return ProbMask(raster.samples[0], entry.meta(1))


class _Runner:
    def __init__(self, manifest: Manifest, config: PipelineConfig):
        self.config = config
        self.providers = {
            SatelliteSource.parse(name): make_provider(kind, manifest)
            for name, kind in config.providers
        }
        # bare masks only stand in where no image of the same view exists
        images = {
            (e.source, e.lat, e.lon, e.year, e.month, e.view) for e in manifest.of_kind("imagery")
        }
        self.orphan_masks = {
            e for e in manifest.of_kind("prob_mask")
            if (e.source, e.lat, e.lon, e.year, e.month, e.view) not in images
        }

    def candidates(self, members) -> list[Candidate]:
        out = []
        for m in members:
            e = m.entry
            tag = e.path.as_posix()
            if e.kind == "imagery":
                out.append(Candidate(m.offset, image=_load_image(e), tag=tag))
            elif e in self.orphan_masks:
                out.append(Candidate(m.offset, mask=_load_mask(e), tag=tag))
        return out

    def __call__(self, item) -> QueryOutcome:
        key, members = item
        cfg = self.config
        stats = FuseStats()
        try:
            fused = fuse_query(
                key, self.candidates(members), self.providers, cfg.fusion, cfg.cloud, cfg.clip, stats
            )
        except NoDataError as exc:
            return QueryOutcome(key, None, stats, str(exc))
        return QueryOutcome(key, opening(fused, cfg.se).bits, stats)


_worker_runner = None


def _init_worker(manifest, config):
    global _worker_runner
    _worker_runner = _Runner(manifest, config)


def _run_in_worker(item):
    return _worker_runner(item)


def run_pipeline(manifest: Manifest, config: PipelineConfig, out_dir) -> RunSummary:
    """Fuse every query in ``manifest`` and write one mask per query to ``out_dir``.

    Results are collected in query order whatever the worker count, so output
    files and the summary are byte-stable.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _load_image.cache_clear()
    _load_mask.cache_clear()
    groups = group_by_query(manifest, config.fusion.window_months)
    items = list(groups.items())

    if config.workers > 1 and len(items) > 1:
        chunk = max(1, len(items) // (config.workers * 4))
        with ProcessPoolExecutor(
            config.workers, initializer=_init_worker, initargs=(manifest, config)
        ) as pool:
            outcomes = list(pool.map(_run_in_worker, items, chunksize=chunk))
    else:
        runner = _Runner(manifest, config)
        outcomes = [runner(item) for item in items]

    summary = RunSummary(queries=len(items))
    removed = set()
    for res in outcomes:
        summary.candidates += res.stats.candidates
        removed.update(res.stats.cloud_removed)
        summary.stage1_removed += len(res.stats.stage1_removed)
        summary.stage2_removed += len(res.stats.stage2_removed)
        summary.masks_used += len(res.stats.used)
        if res.bits is None:
            log.info("no data for query %s: %s", res.key, res.error)
            summary.no_data.append(str(res.key))
            continue
        summary.processed += 1
        write_raster(MultiBandImage(res.bits[None].astype(np.float32)), out / res.key.filename())
    summary.cloud_removed_images = sorted(removed)

    (out / "summary.json").write_text(json.dumps(summary.to_json(), indent=1) + "\n")
    return summary


def load_predictions(pred_dir, keys) -> dict[QueryKey, BinaryMask]:
    pred_dir = Path(pred_dir)
    found = {}
    for key in keys:
        path = pred_dir / key.filename()
        if path.exists():
            raster = read_raster(path)
            found[key] = BinaryMask(raster.samples[0] > 0.5)
    return found


def evaluate(pred_dir, manifest: Manifest):
    """Score predictions in ``pred_dir`` against the manifest's label entries.

    A labelled query without a prediction file is scored as an all-zero
    prediction and flagged as missing.
    """
    labels = sorted(manifest.of_kind("label"), key=lambda e: (e.lat, e.lon, e.year, e.month))
    if not labels:
        raise ValueError("manifest has no label entries")
    preds = load_predictions(pred_dir, [e.key for e in labels])
    scores = []
    for entry in labels:
        gt = BinaryMask(read_raster(entry.path).samples[0] > 0.5)
        pred = preds.get(entry.key)
        missing = pred is None
        if missing:
            pred = BinaryMask(np.zeros(gt.shape, dtype=bool))
        scores.append(QueryScore(str(entry.key), confusion(pred, gt), missing))
    return aggregate(scores)


ABLATION_ROWS = (
    ("original", False, 0),
    ("cloud_removal", True, 0),
    ("cloud_removal_adjacent_month", True, 1),
)


@dataclass
class AblationRow:
    name: str
    summary: RunSummary
    report: object

    def as_row(self) -> dict:
        return {
            "method": self.name,
            "pixel_accuracy": self.report.pixel_accuracy,
            "f1": self.report.f1,
            "iou": self.report.iou,
            "masks_used": self.summary.masks_used,
            "images_removed_by_cloud_screen": len(self.summary.cloud_removed_images),
            "masks_removed_stage1": self.summary.stage1_removed,
            "masks_removed_stage2": self.summary.stage2_removed,
            "no_data_queries": len(self.summary.no_data),
        }


def ablation_configs(config: PipelineConfig):
    for name, screening, window in ABLATION_ROWS:
        yield name, replace(
            config,
            cloud=replace(config.cloud, enabled=screening),
            fusion=replace(config.fusion, window_months=window),
        )


def run_ablation(manifest: Manifest, config: PipelineConfig, out_dir) -> list[AblationRow]:
    """Original, with cloud removal, and with cloud removal plus adjacent months."""
    out = Path(out_dir)
    rows = []
    for name, cfg in ablation_configs(config):
        summary = run_pipeline(manifest, cfg, out / name)
        rows.append(AblationRow(name, summary, evaluate(out / name, manifest)))
    return rows
