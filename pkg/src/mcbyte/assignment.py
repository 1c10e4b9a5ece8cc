"""Cost matrices, feasibility, ambiguity, mask-cue fusion and optimal assignment."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .geometry import BoundingBox, iou_matrix
from .maskops import MaskBitmap, box_intersection_count, box_pixel_area, is_visible

# tolerance used to decide whether two assignment totals tie
TIE_TOL = 1e-9


@dataclass
class CostMatrix:
    cost: np.ndarray
    feasible: Optional[np.ndarray] = None

    def __post_init__(self):
        self.cost = np.asarray(self.cost, dtype=float)
        if self.cost.ndim != 2:
            raise ValueError("cost matrix must be 2-D")
        if self.feasible is not None:
            self.feasible = np.asarray(self.feasible, dtype=bool)
            if self.feasible.shape != self.cost.shape:
                raise ValueError("feasibility mask shape differs from cost shape")

    @property
    def shape(self) -> tuple[int, int]:
        return self.cost.shape

    @property
    def rows(self) -> int:
        return self.cost.shape[0]

    @property
    def cols(self) -> int:
        return self.cost.shape[1]

    def copy(self) -> "CostMatrix":
        return CostMatrix(self.cost.copy(), None if self.feasible is None else self.feasible.copy())


class Gate(enum.Flag):
    """Mask-cue conditions, checked in order before a cost is reduced."""

    VISIBLE = enum.auto()
    CONFIDENT = enum.auto()
    FILL = enum.auto()       # mm2 above its floor
    COVERAGE = enum.auto()   # mm1 above its floor
    ALL = VISIBLE | CONFIDENT | FILL | COVERAGE


class Scope(enum.Enum):
    AMBIGUOUS_ONLY = "ambiguous_only"
    ALL_PAIRS = "all_pairs"


@dataclass(frozen=True)
class MaskCueConfig:
    confidence_min: float = 0.5
    mm2_min: float = 0.3
    mm1_min: float = 0.8

    def __post_init__(self):
        for name in ("confidence_min", "mm2_min", "mm1_min"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"{name} must lie in [0, 1], got {v}")


@dataclass
class Assignment:
    pairs: list[tuple[int, int]] = field(default_factory=list)
    unmatched_tracklets: list[int] = field(default_factory=list)
    unmatched_detections: list[int] = field(default_factory=list)

    def total(self, c: CostMatrix) -> float:
        return float(sum(c.cost[i, j] for i, j in self.pairs))


def build_iou_costs(predicted: Sequence[BoundingBox], detections: Sequence[BoundingBox],
                    scale: float = 0.0) -> CostMatrix:
    """``1 - IoU`` for every tracklet/detection pair (buffered when ``scale > 0``)."""
    return CostMatrix(1.0 - iou_matrix(predicted, detections, scale))


def mark_feasible(c: CostMatrix, match_threshold: float) -> CostMatrix:
    return CostMatrix(c.cost.copy(), c.cost <= match_threshold)


def detect_ambiguity(c: CostMatrix) -> np.ndarray:
    """Feasible entries that share their row or their column with another feasible entry."""
    if c.feasible is None:
        raise ValueError("feasibility must be marked before checking ambiguity")
    f = c.feasible
    row_many = f.sum(axis=1, keepdims=True) >= 2
    col_many = f.sum(axis=0, keepdims=True) >= 2
    return f & (row_many | col_many)


def mask_ratios(mask: MaskBitmap, det: BoundingBox) -> tuple[float, float]:
    """``(mm1, mm2)``; ``mm2`` is 0 when the box covers no image pixels."""
    inter = box_intersection_count(mask, det)
    area = box_pixel_area(mask, det)
    fg = mask.foreground
    return (inter / fg if fg else 0.0), (inter / area if area else 0.0)


def gates_pass(mask: Optional[MaskBitmap], det: BoundingBox, cfg: MaskCueConfig,
               gates: Gate = Gate.ALL) -> tuple[bool, float]:
    """Evaluate the enabled conditions for one pair; returns ``(passed, mm2)``.

    Visibility is always required since the ratios are undefined without a mask.
    """
    if not is_visible(mask):
        return False, 0.0
    if Gate.CONFIDENT in gates and mask.mean_confidence < cfg.confidence_min:
        return False, 0.0
    r1, r2 = mask_ratios(mask, det)
    if Gate.FILL in gates and r2 < cfg.mm2_min:
        return False, r2
    if Gate.COVERAGE in gates and r1 < cfg.mm1_min:
        return False, r2
    return True, r2


def fuse_mask_cue(c: CostMatrix, ambiguous: Optional[np.ndarray],
                  masks: Sequence[Optional[MaskBitmap]], detections: Sequence[BoundingBox],
                  cfg: MaskCueConfig = MaskCueConfig(), scope: Scope = Scope.AMBIGUOUS_ONLY,
                  gates: Gate = Gate.ALL) -> CostMatrix:
    """Subtract the tracklet mask's fill ratio of the detection box where every gate holds.

    Feasibility is carried over unchanged; fusion never makes a pair feasible.
    """
    if len(masks) != c.rows or len(detections) != c.cols:
        raise ValueError("masks/detections do not match the cost matrix shape")
    if scope is Scope.AMBIGUOUS_ONLY:
        if ambiguous is None:
            raise ValueError("ambiguity matrix required for ambiguous-only fusion")
        in_scope = np.asarray(ambiguous, dtype=bool)
    else:
        in_scope = np.ones(c.shape, dtype=bool)
    out = c.copy()
    for i in range(c.rows):
        mask = masks[i]
        if not is_visible(mask) or not in_scope[i].any():
            continue
        for j in np.flatnonzero(in_scope[i]):
            ok, r2 = gates_pass(mask, detections[j], cfg, gates)
            if ok:
                out.cost[i, j] -= r2
    return out


def _sentinel(rows: int, cols: int) -> float:
    return float((rows + cols) * 2 + 1)


def _padded(c: CostMatrix) -> tuple[np.ndarray, np.ndarray, float]:
    n, m = c.shape
    size = max(n, m)
    sentinel = _sentinel(n, m)
    feasible = c.feasible if c.feasible is not None else np.ones(c.shape, dtype=bool)
    work = np.full((size, size), sentinel)
    real = np.zeros((size, size), dtype=bool)
    work[:n, :m] = np.where(feasible, c.cost, sentinel)
    real[:n, :m] = feasible
    return work, real, sentinel


def solve(c: CostMatrix) -> Assignment:
    """Minimum-cost assignment over feasible pairs.

    Infeasible pairs (and padding) carry a sentinel larger than any feasible
    total, so the result first maximizes the number of feasible pairs, then
    minimizes their cost. Among equal-cost optima the lexicographically
    smallest pair list wins: rows are fixed in order, each to its smallest
    column that still admits an optimum, with "unmatched" ranked last.
    """
    n, m = c.shape
    if n == 0 or m == 0:
        return Assignment([], list(range(n)), list(range(m)))
    work, real, sentinel = _padded(c)
    size = work.shape[0]
    forbid = sentinel * (size + 2)

    def run(mat):
        r, k = linear_sum_assignment(mat)
        return k, float(mat[r, k].sum())

    cols, best = run(work)
    tol = TIE_TOL * max(1.0, abs(best))
    constrained = work.copy()
    for i in range(n):
        current = cols[i] if real[i, cols[i]] else None
        # options strictly better than the current choice, in preference order
        candidates = [j for j in np.flatnonzero(real[i]) if current is None or j < current]
        for j in candidates:
            trial = constrained.copy()
            trial[i, :] = forbid
            trial[:, j] = forbid
            trial[i, j] = constrained[i, j]
            k, total = run(trial)
            if total <= best + tol:
                cols = k
                break
        j = cols[i]
        if real[i, j]:
            keep = constrained[i, j]
            constrained[i, :] = forbid
            constrained[:, j] = forbid
            constrained[i, j] = keep
        else:
            constrained[i, real[i]] = forbid

    pairs = [(i, int(cols[i])) for i in range(n) if real[i, cols[i]]]
    matched_cols = {j for _, j in pairs}
    matched_rows = {i for i, _ in pairs}
    return Assignment(pairs,
                      [i for i in range(n) if i not in matched_rows],
                      [j for j in range(m) if j not in matched_cols])
