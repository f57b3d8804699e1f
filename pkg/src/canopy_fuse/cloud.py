"""Brightness-rule cloud screening for optical imagery."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .raster import MultiBandImage, RasterError

SCALES = ("raw8bit", "normalized")


@dataclass(frozen=True)
class CloudRule:
    value_threshold: float = 160.0
    fraction_threshold: float = 0.5
    scale: str = "raw8bit"
    enabled: bool = True

    def __post_init__(self):
        if not 0 < self.fraction_threshold <= 1:
            raise ValueError(f"fraction_threshold must be in (0, 1], got {self.fraction_threshold}")
        if self.scale not in SCALES:
            raise ValueError(f"unknown cloud scale {self.scale!r}")

    @property
    def effective_threshold(self) -> float:
        if self.scale == "normalized":
            return self.value_threshold / 255.0
        return self.value_threshold


def cloud_fraction(img: MultiBandImage, rule: CloudRule = CloudRule()) -> float:
    """Share of pixels whose three bands all strictly exceed the threshold."""
    samples = img.samples if isinstance(img, MultiBandImage) else np.asarray(img)
    if samples.ndim != 3 or samples.shape[0] != 3:
        raise RasterError(f"cloud_fraction needs a 3-band image, got shape {samples.shape}")
    bright = (samples > rule.effective_threshold).all(axis=0)
    return float(np.count_nonzero(bright)) / bright.size


def is_cloudy(img: MultiBandImage, rule: CloudRule = CloudRule()) -> bool:
    meta = img.meta
    if not rule.enabled or meta is None or meta.source.is_sar:
        return False
    return cloud_fraction(img, rule) > rule.fraction_threshold


def screen_clouds(entries, rule: CloudRule = CloudRule()):
    """Drop (image, mask) pairs whose optical image is cloud dominated.

    SAR pairs are always kept. Order of the survivors is preserved.
    """
    return [pair for pair in entries if not is_cloudy(pair[0], rule)]
