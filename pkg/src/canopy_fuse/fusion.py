"""Temporal fusion of per-image probability masks into one decision per query.

For a query (site, month) the candidates are every image within the month
window. Cloudy optical images are dropped, the rest are normalised and turned
into probability masks, masks from the query month are weighted above their
neighbours, masks whose deforestation ratio is an outlier are rejected in two
sigma-clipping passes, and the weighted mean is thresholded.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .cloud import CloudRule, is_cloudy
from .preprocess import ClipSpec, percentile_clip_normalize, select_bands
from .providers import provide
from .raster import BinaryMask, MultiBandImage, ProbMask, ShapeError, binarize


class NoDataError(LookupError):
    """Nothing left to fuse for a query."""

    def __init__(self, query, reason="no usable masks"):
        self.query = query
        super().__init__(f"{query}: {reason}")


@dataclass(frozen=True)
class FusionConfig:
    current_month_weight: float = 2.0
    adjacent_month_weight: float = 1.0
    window_months: int = 1
    sigma_stage1: float = 3.0
    sigma_stage2: float = 1.0
    min_population_for_filter: int = 3
    ratio_binarize_threshold: float = 0.5
    ensemble_threshold: float = 0.4

    def __post_init__(self):
        if self.current_month_weight <= 0 or self.adjacent_month_weight <= 0:
            raise ValueError("month weights must be positive")
        if self.window_months < 0:
            raise ValueError("window_months must be >= 0")
        if not 0 < self.ensemble_threshold < 1:
            raise ValueError("ensemble_threshold must be in (0, 1)")
        if not self.sigma_stage1 >= self.sigma_stage2 > 0:
            raise ValueError("need sigma_stage1 >= sigma_stage2 > 0")
        if not 0 <= self.ratio_binarize_threshold < 1:
            raise ValueError("ratio_binarize_threshold must be in [0, 1)")


@dataclass(frozen=True, eq=False)
class WeightedMask:
    mask: ProbMask
    weight: float
    month_offset: int = 0
    tag: object = None

    def __post_init__(self):
        if not self.weight > 0:
            raise ValueError("mask weight must be positive")


def assign_weights(group, cfg: FusionConfig = FusionConfig()) -> list[WeightedMask]:
    """Weight each ``(mask, month_offset[, tag])`` by whether it is from the query month."""
    out = []
    for item in group:
        mask, offset = item[0], item[1]
        tag = item[2] if len(item) > 2 else None
        if abs(offset) > cfg.window_months:
            raise ValueError(f"month offset {offset} outside window of {cfg.window_months}")
        weight = cfg.current_month_weight if offset == 0 else cfg.adjacent_month_weight
        out.append(WeightedMask(mask, weight, offset, tag))
    return out


def deforestation_ratio(mask: ProbMask, threshold: float) -> Fraction:
    bits = binarize(mask, threshold).bits
    return Fraction(int(np.count_nonzero(bits)), bits.size)


def _clip_stage(ratios: list[Fraction], keep: list[int], k: float) -> list[int]:
    # exact rational arithmetic so the inclusive boundary is honoured
    vals = [ratios[i] for i in keep]
    n = len(vals)
    mean = sum(vals, Fraction(0)) / n
    var = sum(((v - mean) ** 2 for v in vals), Fraction(0)) / n
    bound = Fraction(k) ** 2 * var
    return [i for i in keep if (ratios[i] - mean) ** 2 <= bound]


@dataclass
class FilterResult:
    kept: list
    stage1_removed: list = field(default_factory=list)
    stage2_removed: list = field(default_factory=list)
    ratios: list = field(default_factory=list)


def sigma_filter_detailed(masks, cfg: FusionConfig = FusionConfig()) -> FilterResult:
    masks = list(masks)
    ratios = [deforestation_ratio(m.mask, cfg.ratio_binarize_threshold) for m in masks]
    result = FilterResult(kept=masks, ratios=[float(r) for r in ratios])
    if len(masks) < cfg.min_population_for_filter:
        return result

    keep = list(range(len(masks)))
    removed = []
    for k in (cfg.sigma_stage1, cfg.sigma_stage2):
        survivors = _clip_stage(ratios, keep, k)
        if not survivors:
            survivors = keep
        removed.append([masks[i] for i in keep if i not in survivors])
        keep = survivors
    result.kept = [masks[i] for i in keep]
    result.stage1_removed, result.stage2_removed = removed
    return result


def sigma_filter(masks, cfg: FusionConfig = FusionConfig()) -> list[WeightedMask]:
    """Two-pass outlier rejection on per-mask deforestation ratios.

    Each pass keeps masks with ``|r - mean| <= k * std`` (population std,
    inclusive), the second pass using statistics of the first pass survivors.
    Small populations are returned untouched and a pass that would reject
    everything is skipped.
    """
    return sigma_filter_detailed(masks, cfg).kept


def weighted_average(masks) -> ProbMask:
    masks = list(masks)
    if not masks:
        raise ValueError("weighted_average of no masks")
    shape = masks[0].mask.shape
    acc = np.zeros(shape, dtype=np.float64)
    lo = np.ones(shape, dtype=np.float32)
    hi = np.zeros(shape, dtype=np.float32)
    total = 0.0
    for m in masks:
        if m.mask.shape != shape:
            raise ShapeError(f"mask shapes differ: {shape} vs {m.mask.shape}")
        acc += m.weight * m.mask.probs
        total += m.weight
        np.minimum(lo, m.mask.probs, out=lo)
        np.maximum(hi, m.mask.probs, out=hi)
    # rounding in w*p/w can step outside the inputs' range
    avg = np.clip((acc / total).astype(np.float32), lo, hi)
    return ProbMask(avg, masks[0].mask.meta)


def ensemble_threshold(avg: ProbMask, cfg: FusionConfig = FusionConfig()) -> BinaryMask:
    return binarize(avg, cfg.ensemble_threshold)


@dataclass(frozen=True, eq=False)
class Candidate:
    """One input to a query: a raw image, or a bare mask when no image exists."""

    month_offset: int
    image: MultiBandImage | None = None
    mask: ProbMask | None = None
    tag: object = None


@dataclass
class FuseStats:
    candidates: int = 0
    cloud_removed: list = field(default_factory=list)
    stage1_removed: list = field(default_factory=list)
    stage2_removed: list = field(default_factory=list)
    used: list = field(default_factory=list)


def fuse_query(
    query,
    neighbors,
    providers,
    cfg: FusionConfig = FusionConfig(),
    cloud: CloudRule = CloudRule(),
    clip: ClipSpec = ClipSpec(),
    stats: FuseStats | None = None,
) -> BinaryMask:
    """Fuse every candidate around ``query`` into a binary mask.

    ``providers`` maps a satellite source to an object with a
    ``provide(NormalizedImage) -> ProbMask`` method. Pass a ``FuseStats`` to
    collect what each stage removed (identified by candidate tags).
    """
    stats = stats if stats is not None else FuseStats()
    neighbors = [c for c in neighbors if abs(c.month_offset) <= cfg.window_months]
    stats.candidates = len(neighbors)

    group = []
    for cand in neighbors:
        if cand.image is not None:
            three = select_bands(cand.image)
            if is_cloudy(three, cloud):
                stats.cloud_removed.append(cand.tag)
                continue
            source = cand.image.meta.source
            if source not in providers:
                raise LookupError(f"no provider configured for {source.value}")
            mask = provide(percentile_clip_normalize(three, clip), providers[source])
        else:
            mask = cand.mask
        group.append((mask, cand.month_offset, cand.tag))

    if not group:
        raise NoDataError(query, "every candidate was removed by cloud screening" if neighbors else "no candidates")

    filtered = sigma_filter_detailed(assign_weights(group, cfg), cfg)
    stats.stage1_removed = [m.tag for m in filtered.stage1_removed]
    stats.stage2_removed = [m.tag for m in filtered.stage2_removed]
    stats.used = [m.tag for m in filtered.kept]
    return ensemble_threshold(weighted_average(filtered.kept), cfg)
