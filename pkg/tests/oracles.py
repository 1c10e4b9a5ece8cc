"""Independent reference implementations used only by the tests.

Each oracle is deliberately naive (enumeration, pixel loops, rebuild from
scratch) and shares no code path with the implementation it checks.
"""
from __future__ import annotations

import itertools
import math

import numpy as np


def pixel_box(x, y, w, h, width, height):
    """Pixels covered by a box under round-half-up edges, clipped to the image."""
    def r(v):
        return math.floor(v + 0.5)
    xs = range(max(r(x), 0), min(r(x + w), width))
    ys = range(max(r(y), 0), min(r(y + h), height))
    return {(px, py) for px in xs for py in ys}


def mask_pixels(array):
    """Foreground pixel set of a (height, width) array, as (x, y)."""
    ys, xs = np.nonzero(np.asarray(array))
    return set(zip(xs.tolist(), ys.tolist()))


def enumerate_mm(array, box):
    """(intersection count, mm1 or None, mm2 or None) by set enumeration."""
    height, width = np.asarray(array).shape
    fg = mask_pixels(array)
    bp = pixel_box(box.x, box.y, box.w, box.h, width, height)
    inter = len(fg & bp)
    r1 = inter / len(fg) if fg else None
    r2 = inter / len(bp) if bp else None
    return inter, r1, r2


def integer_box_iou(a, b):
    """IoU by counting unit cells of integer boxes."""
    ca = {(x, y) for x in range(int(a.x), int(a.x + a.w)) for y in range(int(a.y), int(a.y + a.h))}
    cb = {(x, y) for x in range(int(b.x), int(b.x + b.w)) for y in range(int(b.y), int(b.y + b.h))}
    return len(ca & cb) / len(ca | cb)


def brute_force_assignment(cost, feasible, tol=1e-9):
    """Exhaustive search over injections of the smaller side into the larger.

    Infeasible entries count as the sentinel (rows + cols) * 2 + 1 and are
    stripped afterwards. Ties within ``tol`` go to the lexicographically
    smallest sorted pair list. Returns (pairs, total over kept pairs).
    """
    cost = np.asarray(cost, dtype=float)
    feasible = np.asarray(feasible, dtype=bool)
    n, m = cost.shape
    if n == 0 or m == 0:
        return [], 0.0
    sentinel = (n + m) * 2 + 1
    candidates = []
    if n <= m:
        for cols in itertools.permutations(range(m), n):
            pairs = list(zip(range(n), cols))
            candidates.append(pairs)
    else:
        for rows in itertools.permutations(range(n), m):
            pairs = sorted(zip(rows, range(m)))
            candidates.append(pairs)
    scored = []
    for pairs in candidates:
        total = sum(cost[i, j] if feasible[i, j] else sentinel for i, j in pairs)
        kept = sorted((i, j) for i, j in pairs if feasible[i, j])
        scored.append((total, kept))
    best = min(t for t, _ in scored)
    limit = best + tol * max(1.0, abs(best))
    optimal = sorted(kept for t, kept in scored if t <= limit)
    pairs = optimal[0]
    return pairs, float(sum(cost[i, j] for i, j in pairs))


class RebuildSlotOracle:
    """Slot table that recomputes every index from the creation history."""

    def __init__(self):
        self.order = []  # tracklet ids in mask-creation order, live only

    def add(self, tid):
        self.order.append(tid)

    def remove(self, tids):
        gone = set(tids)
        self.order = [t for t in self.order if t not in gone]

    def table(self):
        return {tid: k for k, tid in enumerate(self.order)}
