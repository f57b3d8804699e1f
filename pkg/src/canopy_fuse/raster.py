"""Grid types shared by every pipeline stage.

Samples are held as float32 numpy arrays shaped ``(bands, height, width)``,
i.e. band-major and row-major within a band. Arrays are marked read-only on
construction so instances can be handed to worker processes without copies
drifting apart.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class RasterError(ValueError):
    """Invalid raster construction or access."""


class ShapeError(RasterError):
    """Grids that must align have different dimensions."""


class SatelliteSource(enum.Enum):
    Landsat5 = "Landsat5"
    Landsat8 = "Landsat8"
    Sentinel1 = "Sentinel1"
    Sentinel2 = "Sentinel2"

    @property
    def band_count(self) -> int:
        return _SOURCE_INFO[self][0]

    @property
    def resolution_m(self) -> int:
        return _SOURCE_INFO[self][1]

    @property
    def time_range(self) -> tuple[int, int]:
        return _SOURCE_INFO[self][2]

    @property
    def is_sar(self) -> bool:
        return self is SatelliteSource.Sentinel1

    @classmethod
    def parse(cls, name: str) -> "SatelliteSource":
        try:
            return cls(name)
        except ValueError:
            raise RasterError(f"unknown satellite source {name!r}") from None


# band count, native resolution (m), first and last year of archive
_SOURCE_INFO = {
    SatelliteSource.Landsat5: (8, 30, (1984, 2012)),
    SatelliteSource.Landsat8: (9, 30, (2013, 2021)),
    SatelliteSource.Sentinel1: (2, 10, (2014, 2021)),
    SatelliteSource.Sentinel2: (12, 10, (2018, 2021)),
}


@dataclass(frozen=True)
class ImageMeta:
    source: SatelliteSource
    lat: float
    lon: float
    year: int
    month: int
    band_names: tuple[str, ...] = ()
    view: int = 0

    def __post_init__(self):
        if not 1 <= self.month <= 12:
            raise RasterError(f"month must be in 1..12, got {self.month}")
        object.__setattr__(self, "band_names", tuple(self.band_names))

    def with_bands(self, band_names) -> "ImageMeta":
        return ImageMeta(self.source, self.lat, self.lon, self.year, self.month, tuple(band_names), self.view)


def _frozen(arr, ndim: int, dtype=np.float32) -> np.ndarray:
    out = np.array(arr, dtype=dtype, copy=True)
    if out.ndim != ndim:
        raise RasterError(f"expected {ndim}-d array, got shape {out.shape}")
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class MultiBandImage:
    samples: np.ndarray
    meta: ImageMeta | None = None

    def __post_init__(self):
        data = _frozen(self.samples, 3)
        if min(data.shape) < 1:
            raise RasterError(f"empty image shape {data.shape}")
        if not np.isfinite(data).all():
            raise RasterError("image contains non-finite samples")
        if self.meta is not None and self.meta.band_names and len(self.meta.band_names) != data.shape[0]:
            raise RasterError(
                f"{len(self.meta.band_names)} band names for {data.shape[0]} bands"
            )
        object.__setattr__(self, "samples", data)

    @classmethod
    def from_samples(cls, width: int, height: int, bands: int, samples, meta=None):
        flat = np.asarray(samples, dtype=np.float32).ravel()
        if flat.size != width * height * bands:
            raise RasterError(
                f"sample buffer has {flat.size} values, expected {width}x{height}x{bands}"
            )
        return cls(flat.reshape(bands, height, width), meta)

    @property
    def bands(self) -> int:
        return self.samples.shape[0]

    @property
    def height(self) -> int:
        return self.samples.shape[1]

    @property
    def width(self) -> int:
        return self.samples.shape[2]

    def band(self, name: str) -> np.ndarray:
        names = self.meta.band_names if self.meta is not None else ()
        if name not in names:
            raise KeyError(name)
        return self.samples[names.index(name)]


@dataclass(frozen=True, eq=False)
class NormalizedImage:
    samples: np.ndarray
    meta: ImageMeta | None = None

    def __post_init__(self):
        data = _frozen(self.samples, 3)
        if data.shape[0] != 3:
            raise RasterError(f"normalized image needs 3 channels, got {data.shape[0]}")
        if not ((data >= 0) & (data <= 1)).all():
            raise RasterError("normalized samples must lie in [0, 1]")
        object.__setattr__(self, "samples", data)

    @property
    def height(self) -> int:
        return self.samples.shape[1]

    @property
    def width(self) -> int:
        return self.samples.shape[2]


@dataclass(frozen=True, eq=False)
class ProbMask:
    probs: np.ndarray
    meta: ImageMeta | None = None

    def __post_init__(self):
        data = _frozen(self.probs, 2)
        if data.size == 0:
            raise RasterError("empty probability mask")
        if not ((data >= 0) & (data <= 1)).all():
            raise RasterError("probabilities must lie in [0, 1]")
        object.__setattr__(self, "probs", data)

    @property
    def shape(self) -> tuple[int, int]:
        return self.probs.shape


@dataclass(frozen=True, eq=False)
class BinaryMask:
    bits: np.ndarray

    def __post_init__(self):
        raw = np.asarray(self.bits)
        if raw.ndim != 2:
            raise RasterError(f"binary mask must be 2-d, got shape {raw.shape}")
        if raw.dtype != bool and not np.isin(raw, (0, 1)).all():
            raise RasterError("binary mask values must be 0 or 1")
        object.__setattr__(self, "bits", _frozen(raw, 2, dtype=bool))

    @property
    def shape(self) -> tuple[int, int]:
        return self.bits.shape

    def __eq__(self, other):
        if not isinstance(other, BinaryMask):
            return NotImplemented
        return self.shape == other.shape and bool((self.bits == other.bits).all())

    __hash__ = None


def pixel_at(img: MultiBandImage, band: int, row: int, col: int) -> float:
    _check_index(img, band, row, col)
    return float(img.samples[band, row, col])


def set_pixel(img: MultiBandImage, band: int, row: int, col: int, value: float) -> MultiBandImage:
    """Return a copy of ``img`` with one sample replaced."""
    _check_index(img, band, row, col)
    data = img.samples.copy()
    data[band, row, col] = value
    return MultiBandImage(data, img.meta)


def _check_index(img, band, row, col):
    for name, idx, size in (("band", band, img.bands), ("row", row, img.height), ("col", col, img.width)):
        if not 0 <= idx < size:
            raise IndexError(f"{name} index {idx} out of range [0, {size})")


def mask_ratio(mask: BinaryMask) -> float:
    if mask.bits.size == 0:
        raise RasterError("mask_ratio of an empty mask")
    return float(np.count_nonzero(mask.bits)) / mask.bits.size


def complement(mask: BinaryMask) -> BinaryMask:
    return BinaryMask(~mask.bits)


def binarize(mask: ProbMask, threshold: float) -> BinaryMask:
    """1 where the probability strictly exceeds ``threshold``.

    The comparison runs at float32, the storage precision, so a mask holding
    0.4 is not above a threshold of 0.4.
    """
    return BinaryMask(mask.probs > np.float32(threshold))
