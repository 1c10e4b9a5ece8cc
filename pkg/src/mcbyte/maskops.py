"""Run-length encoded binary masks and the mask/box match ratios.

Runs are column-major and start with a background run (possibly zero), the
uncompressed COCO convention. Box/mask intersections are counted on whole
pixels: a box covers pixel columns ``[round(x), round(x + w))`` and rows
``[round(y), round(y + h))`` with round-half-up, clipped to the image.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np

from .errors import DegenerateBox, EmptyMask
from .geometry import BoundingBox


def _round_half_up(v: float) -> int:
    return math.floor(v + 0.5)


@dataclass(frozen=True, eq=True)
class MaskBitmap:
    width: int
    height: int
    runs: tuple[int, ...]
    mean_confidence: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "runs", tuple(int(r) for r in self.runs))
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"mask size must be positive, got {self.width}x{self.height}")
        if any(r < 0 for r in self.runs):
            raise ValueError("mask runs must be non-negative")
        if sum(self.runs) != self.width * self.height:
            raise ValueError(
                f"mask runs sum to {sum(self.runs)}, expected {self.width * self.height}")
        if not (0.0 <= self.mean_confidence <= 1.0):
            raise ValueError(f"mean_confidence must lie in [0, 1], got {self.mean_confidence}")

    @classmethod
    def from_array(cls, array, mean_confidence: float = 1.0) -> "MaskBitmap":
        """Encode a ``(height, width)`` boolean array."""
        arr = np.asarray(array, dtype=bool)
        if arr.ndim != 2:
            raise ValueError("mask array must be 2-D (height, width)")
        flat = arr.ravel(order="F").astype(np.int8)
        # run boundaries wherever the value flips; a leading 1 gets a zero background run
        change = np.flatnonzero(np.diff(flat)) + 1
        bounds = np.concatenate(([0], change, [flat.size]))
        runs = np.diff(bounds).tolist()
        if flat.size and flat[0] == 1:
            runs = [0] + runs
        height, width = arr.shape
        return cls(width, height, tuple(runs), float(mean_confidence))

    @classmethod
    def empty(cls, width: int, height: int, mean_confidence: float = 0.0) -> "MaskBitmap":
        return cls(width, height, (width * height,), mean_confidence)

    def to_array(self) -> np.ndarray:
        return self._array.copy()

    @cached_property
    def _array(self) -> np.ndarray:
        values = np.zeros(len(self.runs), dtype=bool)
        values[1::2] = True
        flat = np.repeat(values, self.runs)
        return flat.reshape((self.height, self.width), order="F")

    @cached_property
    def _integral(self) -> np.ndarray:
        s = np.zeros((self.height + 1, self.width + 1), dtype=np.int64)
        s[1:, 1:] = self._array.astype(np.int64).cumsum(0).cumsum(1)
        return s

    @cached_property
    def foreground(self) -> int:
        return int(sum(self.runs[1::2]))

    def discrete_box(self, b: BoundingBox) -> tuple[int, int, int, int]:
        """Pixel span ``(x0, y0, x1, y1)`` of ``b``, half-open and clipped to the image."""
        x0 = min(max(_round_half_up(b.x), 0), self.width)
        x1 = min(max(_round_half_up(b.x + b.w), 0), self.width)
        y0 = min(max(_round_half_up(b.y), 0), self.height)
        y1 = min(max(_round_half_up(b.y + b.h), 0), self.height)
        return x0, y0, max(x1, x0), max(y1, y0)

    def with_confidence(self, mean_confidence: float) -> "MaskBitmap":
        return MaskBitmap(self.width, self.height, self.runs, mean_confidence)


def foreground_count(m: MaskBitmap) -> int:
    return m.foreground


def box_intersection_count(m: MaskBitmap, b: BoundingBox) -> int:
    x0, y0, x1, y1 = m.discrete_box(b)
    s = m._integral
    return int(s[y1, x1] - s[y0, x1] - s[y1, x0] + s[y0, x0])


def box_pixel_area(m: MaskBitmap, b: BoundingBox) -> int:
    x0, y0, x1, y1 = m.discrete_box(b)
    return (x1 - x0) * (y1 - y0)


def mm1(m: MaskBitmap, b: BoundingBox) -> float:
    """Fraction of the mask's foreground lying inside the box."""
    fg = m.foreground
    if fg == 0:
        raise EmptyMask("mm1 is undefined for a mask without foreground pixels")
    return box_intersection_count(m, b) / fg


def mm2(m: MaskBitmap, b: BoundingBox) -> float:
    """Fraction of the box's pixels covered by the mask."""
    area = box_pixel_area(m, b)
    if area == 0:
        raise DegenerateBox(f"box {b} covers no pixels of a {m.width}x{m.height} image")
    return box_intersection_count(m, b) / area


def is_visible(m: Optional[MaskBitmap]) -> bool:
    return m is not None and m.foreground > 0


@dataclass
class MaskSet:
    """Masks for one frame, keyed by propagator slot. Missing slots carry no mask."""

    frame_index: int
    entries: dict[int, MaskBitmap] = field(default_factory=dict)

    def __post_init__(self):
        sizes = {(m.width, m.height) for m in self.entries.values()}
        if len(sizes) > 1:
            raise ValueError(f"masks in one frame must share a size, got {sorted(sizes)}")
        if any(k < 0 for k in self.entries):
            raise ValueError("mask slot indices must be non-negative")

    def get(self, slot: Optional[int]) -> Optional[MaskBitmap]:
        if slot is None:
            return None
        return self.entries.get(slot)

    def __len__(self):
        return len(self.entries)

    @property
    def max_slot(self) -> int:
        return max(self.entries) if self.entries else -1
