"""Tracklet state machine and mask-slot bookkeeping.

A mask slot is the index a propagator uses for a live mask. Slots are handed
out in creation order; purging a mask shifts every later slot down so that
indices stay contiguous. Tracklet ids never change and are never reused.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .errors import UnknownTracklet
from .geometry import BoundingBox, iou
from .motion import KalmanState


class TrackState(enum.Enum):
    TENTATIVE = "tentative"
    ACTIVE = "active"
    LOST = "lost"
    REMOVED = "removed"


@dataclass
class Tracklet:
    id: int
    state: TrackState
    kalman: KalmanState
    last_box: BoundingBox
    score: float
    frames_since_update: int = 0
    mask_slot: Optional[int] = None
    start_frame: int = 0

    def __post_init__(self):
        if self.id <= 0:
            raise ValueError(f"tracklet ids are positive, got {self.id}")

    @property
    def is_live(self) -> bool:
        return self.state is not TrackState.REMOVED


class SlotTable:
    """Injective map from tracklet id to a contiguous slot index.

    The table is a value: ``add`` and ``purge_and_remap`` return new tables.
    """

    def __init__(self, order: Iterable[int] = ()):
        self._order = tuple(order)
        if len(set(self._order)) != len(self._order):
            raise ValueError("slot table ids must be unique")
        self._index = {tid: k for k, tid in enumerate(self._order)}

    def add(self, tid: int) -> "SlotTable":
        if tid in self._index:
            raise ValueError(f"tracklet {tid} already owns slot {self._index[tid]}")
        return SlotTable(self._order + (tid,))

    def purge_and_remap(self, removed: Iterable[int]) -> "SlotTable":
        gone = set(removed)
        missing = sorted(gone - self._index.keys())
        if missing:
            raise UnknownTracklet(f"tracklets {missing} hold no mask slot")
        # dropping entries from the creation order shifts each survivor down by
        # the number of freed slots below it
        return SlotTable(t for t in self._order if t not in gone)

    def slot_of(self, tid: int) -> Optional[int]:
        return self._index.get(tid)

    def as_dict(self) -> dict[int, int]:
        return dict(self._index)

    @property
    def order(self) -> tuple[int, ...]:
        """Tracklet ids by slot."""
        return self._order

    def __contains__(self, tid) -> bool:
        return tid in self._index

    def __len__(self) -> int:
        return len(self._order)

    def __eq__(self, other) -> bool:
        return isinstance(other, SlotTable) and self._order == other._order

    def __repr__(self) -> str:
        return f"SlotTable({self.as_dict()!r})"


@dataclass
class WaitingList:
    """Tracklets whose mask creation is deferred while they are strongly occluded."""

    ids: list[int] = field(default_factory=list)

    def add(self, tid: int) -> None:
        if tid not in self.ids:
            self.ids.append(tid)

    def discard(self, tids: Iterable[int]) -> None:
        gone = set(tids)
        self.ids = [t for t in self.ids if t not in gone]

    def __contains__(self, tid) -> bool:
        return tid in self.ids

    def __iter__(self):
        return iter(list(self.ids))

    def __len__(self) -> int:
        return len(self.ids)


def request_mask_creation(candidates: Sequence[tuple[int, BoundingBox]],
                          active_boxes: Sequence[tuple[int, BoundingBox]],
                          occlusion_iou_max: float = 0.7) -> tuple[list[int], list[int]]:
    """Split candidates into ``(to_create, still_waiting)``.

    A candidate is released when its overlap with every *other* box is at most
    ``occlusion_iou_max``. Each candidate is judged on its current box.
    """
    to_create, waiting = [], []
    for tid, box in candidates:
        worst = max((iou(box, other) for oid, other in active_boxes if oid != tid), default=0.0)
        (to_create if worst <= occlusion_iou_max else waiting).append(tid)
    return to_create, waiting


def step_states(tracklets: Sequence[Tracklet], matched: set[int], max_age: int) -> list[Tracklet]:
    """Advance every tracklet by one frame given the ids matched in it.

    Matched tracklets become Active. Unmatched Active or Lost ones become Lost
    and age; past ``max_age`` unmatched frames they are Removed. A Tentative
    tracklet that misses its confirming frame is Removed.
    """
    for t in tracklets:
        if t.state is TrackState.REMOVED:
            continue
        if t.id in matched:
            t.state = TrackState.ACTIVE
            t.frames_since_update = 0
        elif t.state is TrackState.TENTATIVE:
            t.state = TrackState.REMOVED
        else:
            t.frames_since_update += 1
            t.state = TrackState.REMOVED if t.frames_since_update > max_age else TrackState.LOST
    return list(tracklets)
