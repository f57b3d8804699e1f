"""Probability-mask providers standing in for per-satellite segmentation models."""

from __future__ import annotations

import numpy as np

from .ingest import Manifest, read_raster
from .raster import NormalizedImage, ProbMask, RasterError, ShapeError


class MissingMaskError(LookupError):
    pass


class FileBackedProvider:
    """Serve precomputed masks listed as ``prob_mask`` entries of a manifest.

    Only the image metadata takes part in the lookup; pixel content is ignored.
    """

    kind = "file"

    def __init__(self, manifest: Manifest):
        self._index = {}
        for entry in manifest.of_kind("prob_mask"):
            key = (entry.source, entry.lat, entry.lon, entry.year, entry.month, entry.view)
            self._index[key] = entry

    def __contains__(self, meta) -> bool:
        return self._key(meta) in self._index

    @staticmethod
    def _key(meta):
        return (meta.source, meta.lat, meta.lon, meta.year, meta.month, meta.view)

    def provide(self, img: NormalizedImage) -> ProbMask:
        meta = img.meta
        entry = self._index.get(self._key(meta)) if meta is not None else None
        if entry is None:
            raise MissingMaskError(f"no prob_mask entry for {meta}")
        raster = read_raster(entry.path)
        if raster.bands != 1:
            raise RasterError(f"{entry.path}: probability mask must have 1 band, has {raster.bands}")
        if (raster.height, raster.width) != (img.height, img.width):
            raise ShapeError(
                f"{entry.path}: mask is {raster.height}x{raster.width}, image is {img.height}x{img.width}"
            )
        return ProbMask(raster.samples[0], meta)


class HeuristicBaseline:
    """Per-pixel mean brightness of the three channels.

    Not a model of anything: cleared ground tends to be brighter than canopy in
    true colour, which is enough to drive the pipeline end to end without
    weights.
    """

    kind = "heuristic"

    def provide(self, img: NormalizedImage) -> ProbMask:
        return heuristic_baseline(img)


def heuristic_baseline(img: NormalizedImage) -> ProbMask:
    probs = img.samples.astype(np.float64).mean(axis=0)
    return ProbMask(np.clip(probs, 0.0, 1.0), img.meta)


PROVIDER_KINDS = ("file", "heuristic", "oracle")


def make_provider(kind: str, manifest: Manifest):
    if kind == "file":
        return FileBackedProvider(manifest)
    if kind == "heuristic":
        return HeuristicBaseline()
    if kind == "oracle":
        from .synth import SyntheticOracle

        return SyntheticOracle(manifest)
    raise ValueError(f"unknown provider kind {kind!r}")


def provide(img: NormalizedImage, provider) -> ProbMask:
    mask = provider.provide(img)
    if mask.shape != (img.height, img.width):
        raise ShapeError(f"provider returned {mask.shape} for a {img.height}x{img.width} image")
    return mask
