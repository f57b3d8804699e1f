"""Band selection and percentile clip-normalisation."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .raster import MultiBandImage, NormalizedImage, RasterError, SatelliteSource

TRUE_COLOR = ("B4", "B3", "B2")
SAR_BANDS = ("VV", "VH")
MOCK_BAND = "zero"


class UnsupportedSourceError(RasterError):
    pass


class MissingBandError(RasterError):
    pass


@dataclass(frozen=True)
class ClipSpec:
    low_pct: float = 2.0
    high_pct: float = 2.0

    def __post_init__(self):
        if self.low_pct < 0 or self.high_pct < 0 or self.low_pct + self.high_pct >= 100:
            raise ValueError(f"invalid clip percentages {self.low_pct}, {self.high_pct}")


# per-source lookup; edit here to change the true-colour convention
BAND_SELECTION = {
    SatelliteSource.Sentinel2: TRUE_COLOR,
    SatelliteSource.Landsat8: TRUE_COLOR,
    SatelliteSource.Sentinel1: SAR_BANDS,
}


def select_bands(img: MultiBandImage) -> MultiBandImage:
    """Reduce an image to three bands.

    Optical sources keep red, green and blue in that order. Sentinel-1 keeps
    VV and VH and gains an all-zero third band so every source has the same
    channel count.
    """
    meta = img.meta
    if meta is None or meta.source not in BAND_SELECTION:
        source = meta.source.value if meta is not None else None
        raise UnsupportedSourceError(f"no band selection for source {source}")
    wanted = BAND_SELECTION[meta.source]
    missing = [name for name in wanted if name not in meta.band_names]
    if missing:
        raise MissingBandError(f"{meta.source.value} image lacks bands {missing}")

    planes = [img.samples[meta.band_names.index(name)] for name in wanted]
    names = list(wanted)
    if len(planes) < 3:
        planes.append(np.zeros((img.height, img.width), dtype=np.float32))
        names.append(MOCK_BAND)
    return MultiBandImage(np.stack(planes), meta.with_bands(names))


def nearest_rank(sorted_values: np.ndarray, pct: float) -> float:
    n = len(sorted_values)
    idx = math.ceil(pct / 100.0 * n) - 1
    return float(sorted_values[min(max(idx, 0), n - 1)])


def clip_bounds(band: np.ndarray, spec: ClipSpec) -> tuple[float, float]:
    values = np.sort(band, axis=None)
    return nearest_rank(values, spec.low_pct), nearest_rank(values, 100.0 - spec.high_pct)


def percentile_clip_normalize(img: MultiBandImage, spec: ClipSpec = ClipSpec()) -> NormalizedImage:
    if img.bands != 3:
        raise RasterError(f"expected a 3-band image, got {img.bands}")
    out = np.zeros(img.samples.shape, dtype=np.float32)
    for b in range(3):
        band = img.samples[b].astype(np.float64)
        lo, hi = clip_bounds(band, spec)
        if hi > lo:
            scaled = (np.clip(band, lo, hi) - lo) / (hi - lo)
            out[b] = np.clip(scaled, 0.0, 1.0)
    return NormalizedImage(out, img.meta)
