"""Small constructors shared across test modules."""

import numpy as np

from canopy_fuse.raster import ImageMeta, MultiBandImage, ProbMask, SatelliteSource


def make_meta(source=SatelliteSource.Sentinel2, bands=None, lat=-3.5, lon=-54.6, year=2020, month=6, view=0):
    if bands is None:
        bands = ("B4", "B3", "B2")
    return ImageMeta(source, lat, lon, year, month, tuple(bands), view)


def constant_mask(value, shape=(8, 8), meta=None):
    return ProbMask(np.full(shape, value, dtype=np.float32), meta)


def mask_with_ratio(count, shape=(10, 10), value=1.0):
    """Probability mask with exactly ``count`` pixels set to ``value``."""
    probs = np.zeros(shape, dtype=np.float32).ravel()
    probs[:count] = value
    return ProbMask(probs.reshape(shape))


def rgb_image(pixel, shape=(10, 10), source=SatelliteSource.Sentinel2):
    data = np.empty((3, *shape), dtype=np.float32)
    data[:] = np.asarray(pixel, dtype=np.float32)[:, None, None]
    names = ("VV", "VH", "zero") if source.is_sar else ("B4", "B3", "B2")
    return MultiBandImage(data, make_meta(source, names))
