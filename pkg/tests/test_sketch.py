import numpy as np
import pytest

from cometsim.sketch import DEFAULT_MULTIPLIERS, DEFAULT_SHIFTS, HashFamily, SketchTable

from reference import RefCountMin, ref_hash


def fig2_table():
    # H0(x) = x mod 5, H1(x) = (x >> 2) mod 5
    fam = HashFamily([(0, 1, 5), (2, 1, 5)])
    return SketchTable(2, 5, cap=250, hash_family=fam)


def set_group(t, row, values):
    for i, v in zip(t.flat_group(row), values):
        t.counters[i] = v


def test_small_family_groups():
    t = fig2_table()
    assert t.counter_group(12) == [(0, 2), (1, 3)]
    assert t.counter_group(14) == [(0, 4), (1, 3)]
    # 12 and 14 share exactly the partition-1 counter
    assert set(t.counter_group(12)) & set(t.counter_group(14)) == {(1, 3)}


def test_row_zero_maps_to_zero():
    t = SketchTable()
    assert t.counter_group(0) == [(i, 0) for i in range(4)]


def test_default_family_matches_formula():
    fam = HashFamily.default()
    for row in (1, 12, 999, 77_777, (1 << 17) - 1):
        want = [ref_hash(row, s, a, 512) for s, a in zip(DEFAULT_SHIFTS, DEFAULT_MULTIPLIERS)]
        assert fam.indices(row) == want


def test_default_family_extends_deterministically():
    a = HashFamily.default(8, 256)
    assert len(a) == 8 and a == HashFamily.default(8, 256)
    assert a.functions[:4] == HashFamily.default(4, 256).functions


def test_partition_zero_is_bijective_on_low_bits():
    fam = HashFamily.default()
    assert sorted(fam.index(0, r) for r in range(512)) == list(range(512))


def test_bad_families_rejected():
    with pytest.raises(ValueError):
        HashFamily([])
    with pytest.raises(ValueError):
        HashFamily([(0, 3, 8), (0, 3, 8)])
    with pytest.raises(ValueError):
        SketchTable(2, 8, hash_family=HashFamily([(0, 3, 16), (1, 3, 16)]))
    with pytest.raises(ValueError):
        SketchTable(3, 512, hash_family=HashFamily.default(4))


def test_estimate_is_group_minimum():
    t = fig2_table()
    assert t.estimate(12) == 0
    set_group(t, 12, (4, 7))
    assert t.estimate(12) == 4


@pytest.mark.parametrize("before, after, ret", [
    ((3, 5), (4, 5), 4),
    ((3, 3), (4, 4), 4),
    ((250, 250), (250, 250), 250),
])
def test_conservative_increment(before, after, ret):
    t = fig2_table()
    set_group(t, 12, before)
    assert t.increment_conservative(12) == ret
    assert tuple(t.counters[i] for i in t.flat_group(12)) == after


def test_plain_increment_saturates_each_counter():
    t = SketchTable(2, 5, cap=5, hash_family=HashFamily([(0, 1, 5), (2, 1, 5)]), conservative=False)
    set_group(t, 12, (3, 5))
    assert t.increment(12) == 4
    assert tuple(t.counters[i] for i in t.flat_group(12)) == (4, 5)


@pytest.mark.parametrize("before, after", [((249, 250), (250, 250)), ((250, 250), (250, 250)),
                                           ((10, 20), (250, 250))])
def test_pin_group(before, after):
    t = fig2_table()
    set_group(t, 12, before)
    t.pin_group(12, 250)
    assert tuple(t.counters[i] for i in t.flat_group(12)) == after


def test_pin_keeps_neighbours_overestimating():
    # rows 12, 14 share (1, 3); row 13 shares nothing with 12 in partition 0
    t = fig2_table()
    truth = {}
    for r in (12, 14, 13, 14, 12, 12):
        t.increment(r)
        truth[r] = truth.get(r, 0) + 1
    t.pin_group(12, 250)
    for r, c in truth.items():
        assert t.estimate(r) >= c
    # 14 shares only (1, 3) with 12, so its private (0, 4) counter still bounds it
    assert t.estimate(14) == 2

def test_pin_above_cap_rejected():
    t = fig2_table()
    with pytest.raises(ValueError):
        t.pin_group(3, 251)


def test_reset_all_and_array_view():
    t = SketchTable(4, 16, cap=9)
    for r in range(100):
        t.increment(r)
    assert t.as_array().shape == (4, 16)
    assert t.as_array().sum() > 0
    t.reset_all()
    assert not t.as_array().any()


def test_matches_reference_model():
    rng = np.random.default_rng(3)
    fam = HashFamily.default()
    for conservative in (True, False):
        t = SketchTable(4, 512, cap=31, hash_family=fam, conservative=conservative)
        ref = RefCountMin(fam.functions, 512, 31, conservative)
        for r in rng.integers(0, 1 << 17, 5000):
            t.increment(int(r))
            ref.add(int(r))
        assert t.counters == ref.cells


def test_shared_layout_matches_reference():
    fam = HashFamily.default(4, 2048)
    t = SketchTable(4, 512, cap=1000, hash_family=fam, shared=True)
    ref = RefCountMin(fam.functions, 512, 1000, shared=True)
    for r in np.random.default_rng(5).integers(0, 1 << 17, 3000):
        t.increment(int(r))
        ref.add(int(r))
    assert t.counters == ref.cells


def test_counter_bits():
    assert SketchTable(cap=250).counter_bits == 8
    assert SketchTable(cap=31).counter_bits == 5
