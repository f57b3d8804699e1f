"""Binary erosion, dilation and opening with zero padding outside the frame."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .raster import BinaryMask

SHAPES = ("square", "cross")


@dataclass(frozen=True)
class StructElement:
    shape: str = "square"
    radius: int = 1

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ValueError(f"unknown structuring element shape {self.shape!r}")
        if self.radius < 1:
            raise ValueError("structuring element radius must be >= 1")

    @cached_property
    def offsets(self) -> tuple[tuple[int, int], ...]:
        r = self.radius
        if self.shape == "square":
            return tuple((dy, dx) for dy in range(-r, r + 1) for dx in range(-r, r + 1))
        return tuple((dy, dx) for dy in range(-r, r + 1) for dx in range(-r, r + 1) if dy == 0 or dx == 0)

    def footprint(self) -> np.ndarray:
        r = self.radius
        fp = np.zeros((2 * r + 1, 2 * r + 1), dtype=bool)
        for dy, dx in self.offsets:
            fp[dy + r, dx + r] = True
        return fp


def _combine(bits: np.ndarray, se: StructElement, reduce_all: bool) -> np.ndarray:
    r = se.radius
    padded = np.pad(bits, r, constant_values=False)
    h, w = bits.shape
    out = np.full(bits.shape, reduce_all, dtype=bool)
    for dy, dx in se.offsets:
        window = padded[r + dy : r + dy + h, r + dx : r + dx + w]
        if reduce_all:
            out &= window
        else:
            out |= window
    return out


def erode(mask: BinaryMask, se: StructElement = StructElement()) -> BinaryMask:
    return BinaryMask(_combine(mask.bits, se, reduce_all=True))


def dilate(mask: BinaryMask, se: StructElement = StructElement()) -> BinaryMask:
    return BinaryMask(_combine(mask.bits, se, reduce_all=False))


def opening(mask: BinaryMask, se: StructElement = StructElement()) -> BinaryMask:
    """Erode, then dilate the result with the same element."""
    return dilate(erode(mask, se), se)
