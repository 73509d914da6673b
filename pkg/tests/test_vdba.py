import math
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import reference_bwmap
from vpon.errors import ConfigError, UnknownAllocId, WrongClass
from vpon.vdba import (
    CycleState,
    ReserveMode,
    ReservePolicy,
    Tcont,
    TcontClass,
    TcontRegistry,
    compute_bwmap,
    compute_fixed_bwmap,
    ingest_report,
    reserved_words,
    update_reserve_demand,
)
from vpon.wire import FLAG_DBRU, DbruReport, check_bwmap

N, LL = TcontClass.NORMAL, TcontClass.LOW_LATENCY


def registry(*ids, weights=None, ll=()):
    weights = weights or {}
    return TcontRegistry({a: Tcont(LL if a in ll else N, 0, weights.get(a, 1)) for a in ids + tuple(ll)})


def as_tuples(bwmap):
    return [(a.alloc_id, a.start_time, a.grant_size) for a in bwmap]


class TestIngest:
    def test_latest_wins(self):
        reg = registry(7)
        st_ = CycleState()
        ingest_report(st_, DbruReport(7, 10), reg)
        ingest_report(st_, DbruReport(7, 30), reg)
        assert st_.pending_reports == {7: 30}

    def test_unknown_id(self):
        with pytest.raises(UnknownAllocId):
            ingest_report(CycleState(), DbruReport(999, 5), registry(7))

    def test_low_latency_reaching_host(self):
        reg = registry(7, ll=(9000,))
        with pytest.raises(WrongClass):
            ingest_report(CycleState(), DbruReport(9000, 5), reg)
        st_ = ingest_report(CycleState(), DbruReport(9000, 5), reg, allow_low_latency=True)
        assert st_.pending_reports == {9000: 5}

    def test_duplicate_registration(self):
        reg = registry(1)
        with pytest.raises(ConfigError):
            reg.register(1, Tcont(N))


class TestReserve:
    def test_fixed_fraction(self):
        p = ReservePolicy(ReserveMode.FIXED, 0.1, min_words=0, max_words=38880)
        assert reserved_words(p, CycleState(), 38880) == math.floor(Fraction(1, 10) * 38880) == 3888

    def test_fraction_is_exact_rational(self):
        p = ReservePolicy(ReserveMode.FIXED, 0.3)
        assert reserved_words(p, CycleState(), 10) == 3

    def test_zero_fraction_gives_min(self):
        p = ReservePolicy(ReserveMode.FIXED, 0, min_words=250)
        assert reserved_words(p, CycleState(), 38880) == 250

    def test_clamped_to_max(self):
        p = ReservePolicy(ReserveMode.FIXED, 0.5, max_words=1000)
        assert reserved_words(p, CycleState(), 38880) == 1000

    def test_adaptive_alpha_one(self):
        p = ReservePolicy(ReserveMode.ADAPTIVE, ewma_alpha=1, max_words=38880)
        s = update_reserve_demand(CycleState(reserve_demand_ewma=77.0), p, 500)
        assert reserved_words(p, s, 38880) == 500

    def test_adaptive_ewma_rounds_up(self):
        p = ReservePolicy(ReserveMode.ADAPTIVE, ewma_alpha=0.5)
        s = CycleState()
        update_reserve_demand(s, p, 101)
        assert s.reserve_demand_ewma == 50.5
        assert reserved_words(p, s, 38880) == 51
        update_reserve_demand(s, p, 0)
        assert reserved_words(p, s, 38880) == 26

    @pytest.mark.parametrize("kw,field", [
        (dict(fixed_fraction=1), "fixed_fraction"),
        (dict(ewma_alpha=0), "ewma_alpha"),
        (dict(min_words=10, max_words=5), "min_words"),
    ])
    def test_invalid_policy(self, kw, field):
        with pytest.raises(ConfigError, match=field):
            ReservePolicy(**kw)

    def test_max_above_capacity(self):
        with pytest.raises(ConfigError):
            reserved_words(ReservePolicy(max_words=50_000), CycleState(), 38880)


class TestComputeBwmap:
    def test_empty(self):
        assert compute_bwmap(CycleState(), registry(1), 38880, 3888) == []

    def test_both_fully_granted(self):
        s = CycleState({100: 5000, 200: 5000})
        out = compute_bwmap(s, registry(100, 200), 38880, 3888)
        assert as_tuples(out) == [(100, 0, 5000), (200, 5000, 5000)]
        assert all(a.flags == FLAG_DBRU for a in out)

    def test_equal_split_under_overload(self):
        s = CycleState({100: 30000, 200: 30000})
        out = compute_bwmap(s, registry(100, 200), 38880, 3888)
        assert as_tuples(out) == [(100, 0, 17496), (200, 17496, 17496)]
        assert as_tuples(out) == reference_bwmap({100: 30000, 200: 30000}, {100: 1, 200: 1}, 34992)

    def test_leftover_goes_to_lowest_unsatisfied(self):
        # shares are 33/33/33 with one word left over
        s = CycleState({1: 10, 2: 50, 3: 50})
        out = compute_bwmap(s, registry(1, 2, 3), 100, 0)
        assert as_tuples(out) == [(1, 0, 10), (2, 10, 50), (3, 60, 40)]

    def test_weights(self):
        s = CycleState({1: 1000, 2: 1000})
        out = compute_bwmap(s, registry(1, 2, weights={1: 3, 2: 1}), 100, 0)
        assert as_tuples(out) == [(1, 0, 75), (2, 75, 25)]

    def test_zero_grants_omitted(self):
        s = CycleState({1: 0, 2: 5})
        assert as_tuples(compute_bwmap(s, registry(1, 2), 100, 10)) == [(2, 0, 5)]

    def test_reserve_region_untouched(self):
        s = CycleState({1: 10**6})
        out = compute_bwmap(s, registry(1), 38880, 3888)
        assert out[-1].end == 38880 - 3888

    def test_matches_reference_10k(self):
        rng = random.Random(5)
        for _ in range(10_000):
            n = rng.randint(1, 6)
            ids = rng.sample(range(1, 16384), n)
            weights = {a: rng.randint(1, 5) for a in ids}
            demands = {a: rng.randint(0, 100) for a in ids}
            cap = rng.randint(1, 700)
            reserve = rng.randint(0, cap)
            reg = TcontRegistry({a: Tcont(N, 0, weights[a]) for a in ids})
            got = as_tuples(compute_bwmap(CycleState(dict(demands)), reg, cap, reserve))
            assert got == reference_bwmap(demands, weights, cap - reserve)


@settings(max_examples=300, deadline=None)
@given(st.dictionaries(st.integers(1, 16383), st.integers(0, 20000), min_size=1, max_size=12),
       st.integers(1, 38880), st.data())
def test_bwmap_properties(demands, cap, data):
    reserve = data.draw(st.integers(0, cap))
    weights = {a: data.draw(st.integers(1, 8)) for a in demands}
    reg = TcontRegistry({a: Tcont(N, 0, w) for a, w in weights.items()})
    out = compute_bwmap(CycleState(dict(demands)), reg, cap, reserve)
    check_bwmap(out, cap - reserve)
    grantable = cap - reserve
    total = sum(a.grant_size for a in out)
    assert total <= grantable
    for a in out:
        assert a.grant_size <= demands[a.alloc_id]
    if sum(demands.values()) >= grantable:
        assert grantable - total < len(demands)
    else:
        assert total == sum(demands.values())
    again = compute_bwmap(CycleState(dict(demands)), reg, cap, reserve)
    assert again == out


class TestFixed:
    def test_four_ids(self):
        out = compute_fixed_bwmap(registry(1, 2, 3, 4), 38880)
        assert as_tuples(out) == [(1, 0, 9720), (2, 9720, 9720), (3, 19440, 9720), (4, 29160, 9720)]

    def test_single_id(self):
        assert as_tuples(compute_fixed_bwmap(registry(5), 38880)) == [(5, 0, 38880)]

    def test_remainder_to_lowest(self):
        assert [a.grant_size for a in compute_fixed_bwmap(registry(9, 3, 5), 10)] == [4, 3, 3]

    def test_includes_both_classes(self):
        out = compute_fixed_bwmap(registry(1, ll=(9000,)), 100)
        assert as_tuples(out) == [(1, 0, 50), (9000, 50, 50)]

    def test_empty_registry(self):
        with pytest.raises(ValueError):
            compute_fixed_bwmap(TcontRegistry(), 100)
