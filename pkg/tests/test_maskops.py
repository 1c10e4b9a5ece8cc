import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mcbyte.errors import DegenerateBox, EmptyMask
from mcbyte.geometry import BoundingBox
from mcbyte.maskops import (
    MaskBitmap, MaskSet, box_intersection_count, foreground_count, is_visible, mm1, mm2,
)

from oracles import enumerate_mm


def test_foreground_count_examples():
    assert foreground_count(MaskBitmap.empty(4, 4)) == 0
    assert foreground_count(MaskBitmap.from_array(np.ones((4, 4), bool))) == 16
    assert foreground_count(MaskBitmap(2, 2, (1, 2, 1))) == 2


def test_rle_is_column_major_with_leading_background():
    arr = np.array([[1, 0, 0],
                    [1, 1, 0]], dtype=bool)
    m = MaskBitmap.from_array(arr)
    # column 0 = (1, 1), column 1 = (0, 1), column 2 = (0, 0)
    assert m.runs == (0, 2, 1, 1, 2)
    assert np.array_equal(m.to_array(), arr)


def test_bitmap_invariants():
    with pytest.raises(ValueError):
        MaskBitmap(2, 2, (1, 2))
    with pytest.raises(ValueError):
        MaskBitmap(2, 2, (5, -1))
    with pytest.raises(ValueError):
        MaskBitmap(2, 2, (4,), mean_confidence=1.5)


def test_box_intersection_examples():
    arr = np.zeros((10, 10), bool)
    arr[:, 0] = True
    m = MaskBitmap.from_array(arr)
    assert box_intersection_count(m, BoundingBox(0, 0, 1, 5)) == 5
    assert box_intersection_count(m, BoundingBox(-3, -3, 20, 20)) == foreground_count(m)
    assert box_intersection_count(MaskBitmap.empty(10, 10), BoundingBox(0, 0, 5, 5)) == 0


def test_rounding_is_half_up():
    arr = np.ones((10, 10), bool)
    m = MaskBitmap.from_array(arr)
    # x in [1.5, 3.5) -> columns [2, 4) ; y in [0.49, 1.49) -> rows [0, 1)
    assert box_intersection_count(m, BoundingBox(1.5, 0.49, 2.0, 1.0)) == 2
    assert m.discrete_box(BoundingBox(1.5, 0.49, 2.0, 1.0)) == (2, 0, 4, 1)


def test_mm_examples():
    arr = np.zeros((40, 40), bool)
    arr[10:20, 10:20] = True  # 100 px
    m = MaskBitmap.from_array(arr)
    assert mm1(m, BoundingBox(5, 5, 20, 20)) == 1.0          # mask inside box
    assert mm1(m, BoundingBox(10, 10, 5, 10)) == 0.5          # half of it inside
    assert mm2(m, BoundingBox(10, 10, 10, 10)) == 1.0         # mask covers box
    assert mm2(m, BoundingBox(5, 5, 20, 20)) == 0.25          # 100 of 400 px
    assert mm2(MaskBitmap.empty(40, 40), BoundingBox(0, 0, 8, 8)) == 0.0
    with pytest.raises(EmptyMask):
        mm1(MaskBitmap.empty(40, 40), BoundingBox(0, 0, 8, 8))
    with pytest.raises(DegenerateBox):
        mm2(m, BoundingBox(100, 100, 5, 5))


def test_mask_inside_box_gives_both_ratios_high():
    # a blob filling most of its box, like the best-case configuration for the cue
    arr = np.zeros((50, 50), bool)
    arr[12:38, 16:34] = True
    m = MaskBitmap.from_array(arr)
    box = BoundingBox(15, 11, 20, 28)
    assert mm1(m, box) == 1.0
    assert mm2(m, box) > 0.8


def test_is_visible():
    assert not is_visible(None)
    assert not is_visible(MaskBitmap.empty(3, 3))
    assert is_visible(MaskBitmap(3, 3, (4, 1, 4)))


def test_mask_set_rejects_mixed_sizes():
    with pytest.raises(ValueError):
        MaskSet(1, {0: MaskBitmap.empty(3, 3), 1: MaskBitmap.empty(4, 3)})
    ms = MaskSet(1, {2: MaskBitmap.empty(3, 3)})
    assert ms.get(2) is not None and ms.get(0) is None and ms.get(None) is None


def _random_case(rng, size=64):
    density = rng.uniform(0.0, 0.6)
    arr = rng.random((size, size)) < density
    if rng.random() < 0.5:  # blobby masks as well as salt noise
        arr = np.zeros((size, size), bool)
        x0, y0 = rng.integers(0, size, 2)
        arr[y0:y0 + rng.integers(1, 30), x0:x0 + rng.integers(1, 30)] = True
    box = BoundingBox(rng.uniform(-10, size), rng.uniform(-10, size),
                      rng.uniform(0.3, 40), rng.uniform(0.3, 40))
    return arr, box


def test_ratios_match_enumeration_oracle():
    rng = np.random.default_rng(11)
    for _ in range(300):
        arr, box = _random_case(rng)
        m = MaskBitmap.from_array(arr)
        inter, r1, r2 = enumerate_mm(arr, box)
        assert box_intersection_count(m, box) == inter
        if r1 is None:
            with pytest.raises(EmptyMask):
                mm1(m, box)
        else:
            assert mm1(m, box) == r1
            assert 0.0 <= r1 <= 1.0
            # mm1 is exactly 1 iff the box holds every foreground pixel
            assert (mm1(m, box) == 1.0) == (inter == foreground_count(m))
        if r2 is None:
            with pytest.raises(DegenerateBox):
                mm2(m, box)
        else:
            assert mm2(m, box) == r2
            assert 0.0 <= r2 <= 1.0


def test_rle_round_trip_random():
    rng = np.random.default_rng(5)
    for _ in range(1000):
        h, w = rng.integers(1, 20, 2)
        arr = rng.random((h, w)) < rng.uniform(0, 1)
        m = MaskBitmap.from_array(arr, mean_confidence=float(rng.random()))
        assert np.array_equal(m.to_array(), arr)
        assert sum(m.runs) == h * w
        assert MaskBitmap.from_array(m.to_array(), m.mean_confidence) == m


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 30), st.integers(0, 30), st.integers(1, 12), st.integers(1, 12),
       st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_mm2_non_increasing_under_dilation(x, y, w, h, grow, seed):
    # the mask sits inside the starting box, so dilation only adds empty pixels
    rng = np.random.default_rng(seed)
    arr = np.zeros((48, 48), bool)
    arr[y:y + h, x:x + w] = rng.random((h, w)) < 0.6
    m = MaskBitmap.from_array(arr)
    box = BoundingBox(x, y, w, h)
    last = mm2(m, box)
    for _ in range(grow):
        box = BoundingBox(box.x - 1, box.y - 1, box.w + 2, box.h + 2)
        cur = mm2(m, box)
        assert cur <= last
        last = cur
