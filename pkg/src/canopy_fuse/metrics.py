"""Pixel accuracy, F1 and IoU over binary deforestation masks."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .raster import BinaryMask, ShapeError


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn, self.tn + other.tn)

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


def confusion(pred: BinaryMask, gt: BinaryMask) -> ConfusionCounts:
    if pred.shape != gt.shape:
        raise ShapeError(f"prediction {pred.shape} vs ground truth {gt.shape}")
    p, g = pred.bits, gt.bits
    tp = int(np.count_nonzero(p & g))
    fp = int(np.count_nonzero(p & ~g))
    fn = int(np.count_nonzero(~p & g))
    return ConfusionCounts(tp, fp, fn, p.size - tp - fp - fn)


def pixel_accuracy(c: ConfusionCounts) -> float:
    if c.total == 0:
        raise ValueError("pixel accuracy of zero pixels")
    return (c.tp + c.tn) / c.total


def f1(c: ConfusionCounts, empty_score: float = 1.0) -> float:
    denom = 2 * c.tp + c.fp + c.fn
    return empty_score if denom == 0 else 2 * c.tp / denom


def iou(c: ConfusionCounts, empty_score: float = 1.0) -> float:
    denom = c.tp + c.fp + c.fn
    return empty_score if denom == 0 else c.tp / denom


@dataclass
class QueryScore:
    query: str
    counts: ConfusionCounts
    missing: bool = False

    def as_row(self) -> dict:
        return {
            "query": self.query,
            **asdict(self.counts),
            "pixel_accuracy": pixel_accuracy(self.counts),
            "f1": f1(self.counts),
            "iou": iou(self.counts),
            "missing_prediction": self.missing,
        }


@dataclass
class MetricsReport:
    pixel_accuracy: float
    f1: float
    iou: float
    counts: ConfusionCounts
    per_query: list = field(default_factory=list)

    @property
    def missing(self) -> list[str]:
        return [q.query for q in self.per_query if q.missing]

    def to_json(self, per_query=True) -> dict:
        doc = {
            "pixel_accuracy": self.pixel_accuracy,
            "f1": self.f1,
            "iou": self.iou,
            "counts": asdict(self.counts),
            "missing_predictions": self.missing,
        }
        if per_query:
            doc["per_query"] = [q.as_row() for q in self.per_query]
        return doc


def aggregate(scores) -> MetricsReport:
    """Micro-average: sum confusion counts over queries, then score once.

    Accepts ``QueryScore`` objects or bare ``ConfusionCounts``.
    """
    scores = [s if isinstance(s, QueryScore) else QueryScore(str(i), s) for i, s in enumerate(scores)]
    if not scores:
        raise ValueError("no labelled queries to aggregate")
    total = sum((s.counts for s in scores), ConfusionCounts())
    return MetricsReport(pixel_accuracy(total), f1(total), iou(total), total, scores)
