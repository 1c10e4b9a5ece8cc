"""Axis-aligned box arithmetic.

Boxes are ``(x, y, w, h)`` with ``(x, y)`` the top-left corner in 0-based
pixel coordinates. Areas are continuous (``w * h``); pixel-discrete measures
live in :mod:`mcbyte.maskops`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class BoundingBox:
    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        for name in ("x", "y", "w", "h"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"box field {name} must be finite, got {getattr(self, name)!r}")
        if not (self.w > 0 and self.h > 0):
            raise ValueError(f"box must have positive size, got w={self.w}, h={self.h}")

    @property
    def x2(self) -> float:
        return self.x + self.w

    @property
    def y2(self) -> float:
        return self.y + self.h

    @property
    def area(self) -> float:
        return self.w * self.h

    @property
    def center(self) -> tuple[float, float]:
        return self.x + self.w / 2.0, self.y + self.h / 2.0

    def to_xyah(self) -> np.ndarray:
        """Center x, center y, aspect ratio (w/h), height."""
        cx, cy = self.center
        return np.array([cx, cy, self.w / self.h, self.h], dtype=float)

    @classmethod
    def from_xyah(cls, xyah) -> "BoundingBox":
        cx, cy, a, h = (float(v) for v in xyah[:4])
        w = a * h
        return cls(cx - w / 2.0, cy - h / 2.0, w, h)

    def to_xyxy(self) -> tuple[float, float, float, float]:
        return self.x, self.y, self.x2, self.y2

    @classmethod
    def from_xyxy(cls, x1, y1, x2, y2) -> "BoundingBox":
        return cls(x1, y1, x2 - x1, y2 - y1)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return self.x, self.y, self.w, self.h


@dataclass(frozen=True)
class BufferScales:
    """Buffer ratios for the two cascade levels of buffered-IoU matching."""

    b1: float = 0.3
    b2: float = 0.4

    def __post_init__(self):
        if not (0.0 <= self.b1 <= self.b2):
            raise ValueError(f"buffer scales must satisfy 0 <= b1 <= b2, got {self.b1}, {self.b2}")


def intersection_area(a: BoundingBox, b: BoundingBox) -> float:
    iw = min(a.x + a.w, b.x + b.w) - max(a.x, b.x)
    ih = min(a.y + a.h, b.y + b.h) - max(a.y, b.y)
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    return iw * ih


def iou(a: BoundingBox, b: BoundingBox) -> float:
    if a == b:
        return 1.0
    inter = intersection_area(a, b)
    if inter == 0.0:
        return 0.0
    # (x + w) - x need not equal w in floating point; keep the ratio in [0, 1]
    return min(inter / (a.w * a.h + b.w * b.h - inter), 1.0)


def buffer(a: BoundingBox, scale: float) -> BoundingBox:
    """Grow ``a`` by ``scale * w`` horizontally and ``scale * h`` vertically, keeping the center.

    No clamping to the image: buffered boxes may extend to negative coordinates.
    """
    if scale < 0:
        raise ValueError(f"buffer scale must be >= 0, got {scale}")
    return BoundingBox(a.x - scale * a.w / 2.0, a.y - scale * a.h / 2.0,
                       a.w * (1.0 + scale), a.h * (1.0 + scale))


def buffered_iou(a: BoundingBox, b: BoundingBox, scale: float) -> float:
    return iou(buffer(a, scale), buffer(b, scale))


def boxes_to_array(boxes: Sequence[BoundingBox]) -> np.ndarray:
    if len(boxes) == 0:
        return np.zeros((0, 4), dtype=float)
    return np.array([b.as_tuple() for b in boxes], dtype=float)


def iou_matrix(a: Sequence[BoundingBox], b: Sequence[BoundingBox], scale: float = 0.0) -> np.ndarray:
    """Pairwise (buffered) IoU, shape ``(len(a), len(b))``.

    Uses the same operation order as :func:`iou` so entries agree bit-for-bit
    with the scalar function.
    """
    A = boxes_to_array(a)
    B = boxes_to_array(b)
    if A.shape[0] == 0 or B.shape[0] == 0:
        return np.zeros((A.shape[0], B.shape[0]), dtype=float)
    if scale:
        if scale < 0:
            raise ValueError(f"buffer scale must be >= 0, got {scale}")
        A = np.stack([A[:, 0] - scale * A[:, 2] / 2.0, A[:, 1] - scale * A[:, 3] / 2.0,
                      A[:, 2] * (1.0 + scale), A[:, 3] * (1.0 + scale)], axis=1)
        B = np.stack([B[:, 0] - scale * B[:, 2] / 2.0, B[:, 1] - scale * B[:, 3] / 2.0,
                      B[:, 2] * (1.0 + scale), B[:, 3] * (1.0 + scale)], axis=1)
    ax, ay, aw, ah = (A[:, k][:, None] for k in range(4))
    bx, by, bw, bh = (B[:, k][None, :] for k in range(4))
    iw = np.minimum(ax + aw, bx + bw) - np.maximum(ax, bx)
    ih = np.minimum(ay + ah, by + bh) - np.maximum(ay, by)
    overlap = (iw > 0.0) & (ih > 0.0)
    inter = np.where(overlap, iw * ih, 0.0)
    union = aw * ah + bw * bh - inter
    out = np.zeros(inter.shape, dtype=float)
    np.divide(inter, union, out=out, where=overlap)
    np.minimum(out, 1.0, out=out)
    same = (ax == bx) & (ay == by) & (aw == bw) & (ah == bh)
    out[same] = 1.0
    return out
