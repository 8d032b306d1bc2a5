import math
import random

import pytest

from cometsim.baselines import (
    CbfTracker,
    MisraGriesTracker,
    NullTracker,
    ParaTracker,
    PerRowOracleTracker,
    graphene_entries,
    para_probability,
    shared_hash_family,
)
from cometsim.tracker import PreventiveRefresh


def test_perrow_refreshes_exactly_at_threshold():
    t = PerRowOracleTracker(5)
    out = [t.on_activation(9) for _ in range(10)]
    assert [i for i, d in enumerate(out) if d] == [4, 9]
    assert out[4] == PreventiveRefresh(9, (8, 10))
    t.on_activation(9)
    t.reset()
    assert t.estimate(9) == 0


def test_misra_gries_base_cases():
    t = MisraGriesTracker(2, 100)
    t.on_activation(9)
    assert t.entries == {9: 1}
    t.on_activation(9)
    t.on_activation(4)
    # table full, no entry at spillover 0: spillover grows
    t.on_activation(5)
    assert t.spillover == 1 and 5 not in t.entries
    assert t.estimate(5) == 1
    # row 4 sits at the spillover value now and is replaced
    t.on_activation(6)
    assert t.entries == {9: 2, 6: 2}


def test_misra_gries_refresh_resets_to_spillover():
    t = MisraGriesTracker(1, 3)
    t.on_activation(1)
    t.on_activation(2)  # spillover -> 1
    t.on_activation(1)
    d = t.on_activation(1)
    assert d == PreventiveRefresh(1, (0, 2))
    assert t.entries[1] == t.spillover == 1


def test_misra_gries_never_underestimates():
    rng = random.Random(1)
    t = MisraGriesTracker(16, 40)
    truth = {}
    for _ in range(20_000):
        r = rng.randrange(64) if rng.random() < 0.5 else rng.randrange(5)
        truth[r] = truth.get(r, 0) + 1
        if t.on_activation(r) is not None:
            truth[r] = 0
        assert len(t.entries) <= 16
        assert all(v >= t.spillover for v in t.entries.values())
    for r, c in truth.items():
        assert t.estimate(r) >= c


def test_graphene_table_size():
    assert graphene_entries(250) == math.ceil(2_720_000 / 3 / 250) == 3627
    assert graphene_entries(31) == 29248


def test_para_probability():
    p = para_probability(1000)
    assert p == pytest.approx(0.0339, abs=5e-5)
    assert (1 - p) ** 1000 == pytest.approx(1e-15, rel=1e-6)


def test_para_rate_and_determinism():
    a = ParaTracker(0.0339, seed=7)
    b = ParaTracker(0.0339, seed=7)
    da = [a.on_activation(3) for _ in range(50_000)]
    assert da == [b.on_activation(3) for _ in range(50_000)]
    rate = sum(d is not None for d in da) / len(da)
    assert rate == pytest.approx(0.0339, abs=0.003)
    assert all(ParaTracker(1.0).on_activation(5) for _ in range(10))
    with pytest.raises(ValueError):
        ParaTracker(0)


def test_cbf_single_row_counts_exactly():
    t = CbfTracker(125)
    for i in range(1, 125):
        assert t.on_activation(77) is None
        assert t.estimate(77) == i
    assert t.on_activation(77) is not None
    assert t.on_activation(77) is not None  # saturated until reset
    t.reset()
    assert t.estimate(77) == 0


def test_cbf_same_budget_as_counter_table():
    t = CbfTracker(125)
    assert len(t.table.counters) == 2048
    fam = shared_hash_family()
    assert all(m == 2048 for _, _, m in fam.functions)


def test_null_tracker():
    t = NullTracker()
    assert t.on_activation(1) is None and t.estimate(1) is None
