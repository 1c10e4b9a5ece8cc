import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mcbyte.errors import UnknownTracklet
from mcbyte.geometry import BoundingBox
from mcbyte.lifecycle import (
    SlotTable, TrackState, Tracklet, WaitingList, request_mask_creation, step_states,
)
from mcbyte.maskops import MaskBitmap
from mcbyte.motion import kf_init
from mcbyte.pipeline import MaskManagementMessages
from mcbyte.providers import OracleMaskSource

from oracles import RebuildSlotOracle


def _trk(tid, state=TrackState.ACTIVE, age=0):
    b = BoundingBox(0, 0, 10, 20)
    return Tracklet(tid, state, kf_init(b), b, 0.9, age)


def test_purge_shift_rule():
    t = SlotTable([7, 8, 9])
    assert t.purge_and_remap([8]).as_dict() == {7: 0, 9: 1}
    assert t.purge_and_remap([]) == t
    assert t.purge_and_remap([7]).as_dict() == {8: 0, 9: 1}
    assert len(t.purge_and_remap([7, 8, 9])) == 0


def test_purge_unknown_raises():
    with pytest.raises(UnknownTracklet):
        SlotTable([1, 2]).purge_and_remap([3])


def test_add_is_persistent_and_rejects_duplicates():
    a = SlotTable()
    b = a.add(5)
    assert len(a) == 0 and b.slot_of(5) == 0
    with pytest.raises(ValueError):
        b.add(5)


def test_tracklet_id_positive():
    with pytest.raises(ValueError):
        _trk(0)


def test_slot_fuzz_against_rebuild():
    rng = random.Random(1234)
    for _ in range(300):
        table, oracle, next_id = SlotTable(), RebuildSlotOracle(), 1
        for _ in range(30):
            if table.order and rng.random() < 0.4:
                gone = rng.sample(table.order, rng.randint(1, len(table.order)))
                table = table.purge_and_remap(gone)
                oracle.remove(gone)
            else:
                table = table.add(next_id)
                oracle.add(next_id)
                next_id += 1
            d = table.as_dict()
            assert d == oracle.table()
            assert sorted(d.values()) == list(range(len(d)))


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.booleans(), st.integers(0, 10 ** 6)), max_size=40))
def test_slot_table_contiguous_and_injective(ops):
    table, next_id = SlotTable(), 1
    for add, pick in ops:
        if add or not table.order:
            table, next_id = table.add(next_id), next_id + 1
        else:
            table = table.purge_and_remap([table.order[pick % len(table.order)]])
        d = table.as_dict()
        assert len(set(d.values())) == len(d)
        assert sorted(d.values()) == list(range(len(d)))


def test_bitmap_linkage_survives_remaps():
    rng = np.random.default_rng(5)
    n_obj = 12
    bitmaps = {k: MaskBitmap.from_array(rng.random((16, 16)) < 0.3, 0.9) for k in range(1, n_obj + 1)}
    boxes = {k: BoundingBox(100.0 * k, 0, 10, 10) for k in bitmaps}
    src = OracleMaskSource(lambda t: boxes, lambda t: bitmaps)
    owner = {}
    live = []
    tid = 0
    pyr = random.Random(6)
    for t in range(1, 200):
        create, purge = [], []
        if live and pyr.random() < 0.4:
            purge = pyr.sample(live, pyr.randint(1, min(3, len(live))))
        elif len(live) < n_obj:
            tid += 1
            obj = pyr.choice([k for k in bitmaps if k not in owner.values()])
            owner[tid] = obj
            create = [(tid, boxes[obj])]
        src.apply_slot_messages(MaskManagementMessages(t, create, purge))
        live = [x for x in live if x not in purge] + [c for c, _ in create]
        for p in purge:
            owner.pop(p)
        ms = src.masks(t)
        for x in live:
            got = ms.get(src.table.slot_of(x))
            assert np.array_equal(got.to_array(), bitmaps[owner[x]].to_array())


def test_request_mask_creation():
    a = BoundingBox(0, 0, 10, 10)
    far = BoundingBox(100, 100, 10, 10)
    assert request_mask_creation([(1, a)], [(1, a), (2, far)]) == ([1], [])
    # 90% overlap waits
    assert request_mask_creation([(1, a)], [(2, BoundingBox(0, 0, 10, 9))]) == ([], [1])
    # boundary is inclusive
    half = BoundingBox(0, 0, 10, 7)
    assert request_mask_creation([(1, a)], [(2, half)], 0.7) == ([1], [])


def test_waiting_then_released_next_frame():
    wl = WaitingList()
    occluder = BoundingBox(1, 0, 10, 10)
    me = BoundingBox(0, 0, 10, 10)
    create, wait = request_mask_creation([(3, me)], [(4, occluder)])
    for w in wait:
        wl.add(w)
    assert create == [] and 3 in wl
    # the occluder moved; iou = 4*10 / (2*100 - 40) = 0.25
    create, wait = request_mask_creation([(3, me)], [(4, BoundingBox(6, 0, 10, 10))])
    assert create == [3] and wait == []
    wl.discard(create)
    assert len(wl) == 0


def test_step_states_transitions():
    a, l, t = _trk(1), _trk(2, TrackState.LOST, 3), _trk(3, TrackState.TENTATIVE)
    step_states([a, l, t], {2, 3}, max_age=30)
    assert (a.state, a.frames_since_update) == (TrackState.LOST, 1)
    assert (l.state, l.frames_since_update) == (TrackState.ACTIVE, 0)
    assert t.state is TrackState.ACTIVE
    dead = _trk(4, TrackState.TENTATIVE)
    step_states([dead], set(), 30)
    assert dead.state is TrackState.REMOVED


def test_active_removed_after_max_age_plus_one():
    a = _trk(1)
    for k in range(5):
        step_states([a], set(), max_age=5)
        assert a.state is TrackState.LOST
    step_states([a], set(), max_age=5)
    assert a.state is TrackState.REMOVED
    step_states([a], {1}, 5)
    assert a.state is TrackState.REMOVED
