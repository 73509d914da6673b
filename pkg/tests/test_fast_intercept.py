import random

import pytest

from oracles import reference_fifo_merge
from vpon.errors import MalformedInput
from vpon.fast_intercept import (
    ClassifierTable,
    PendingQueue,
    Route,
    classify,
    intercept,
    merge_bwmap,
)
from vpon.vdba import Tcont, TcontClass, TcontRegistry
from vpon.wire import (
    ALLOC_RECORD_LEN,
    ENCAP_HEADER_LEN,
    FLAG_DBRU,
    HLEND_LEN,
    AllocationStructure,
    DbruReport,
    DownstreamFrame,
    check_bwmap,
    encode_downstream,
)

CAP = 38880


def queue_of(*entries, capacity=1024):
    q = PendingQueue(capacity)
    for i, (a, w) in enumerate(entries):
        intercept(q, DbruReport(a, w), i)
    return q


class TestClassify:
    def test_in_set(self):
        assert classify(DbruReport(9000, 1), ClassifierTable(frozenset({9000}))) is Route.FAST

    def test_not_in_set(self):
        assert classify(DbruReport(1, 1), ClassifierTable(frozenset({9000}))) is Route.HOST

    def test_empty_table(self):
        for a in (0, 1, 9000, 16383):
            assert classify(DbruReport(a, 1), ClassifierTable()) is Route.HOST

    def test_from_registry(self):
        reg = TcontRegistry({1: Tcont(TcontClass.NORMAL), 9: Tcont(TcontClass.LOW_LATENCY)})
        assert ClassifierTable.from_registry(reg).low_latency_ids == {9}


class TestIntercept:
    def test_enqueue(self):
        q = intercept(PendingQueue(), DbruReport(9000, 120), 55)
        assert len(q) == 1
        e = q.entries[0]
        assert (e.alloc_id, e.remaining_words, e.intercepted_at_ns) == (9000, 120, 55)

    def test_zero_not_enqueued(self):
        assert len(intercept(PendingQueue(), DbruReport(9000, 0), 0)) == 0

    def test_overflow_drops_newest(self):
        q = queue_of((1, 5), (2, 5), capacity=2)
        intercept(q, DbruReport(3, 5), 9)
        assert q.drops == 1
        assert [e.alloc_id for e in q] == [1, 2]


class TestMerge:
    def test_empty_queue_identity(self):
        f = DownstreamFrame((AllocationStructure(1, 0, 100),), 4)
        out, q, merged = merge_bwmap(f, PendingQueue(), CAP, 3888)
        assert out == f and merged == 0

    def test_single_grant_in_reserve(self):
        f = DownstreamFrame((AllocationStructure(1, 0, 5000),), 4)
        out, q, merged = merge_bwmap(f, queue_of((9000, 120)), CAP, 3888)
        assert out.bwmap[-1] == AllocationStructure(9000, 34992, 120, FLAG_DBRU)
        assert out.hlend.bwmap_len == 2
        assert merged == 120 and len(q) == 0

    def test_partial_grant_carries_over(self):
        cap = 1000
        out, q, merged = merge_bwmap(DownstreamFrame(), queue_of((11, 80), (12, 50)), cap, 100)
        assert [(a.alloc_id, a.start_time, a.grant_size) for a in out.bwmap] == \
            [(11, 900, 80), (12, 980, 20)]
        assert [(e.alloc_id, e.remaining_words) for e in q] == [(12, 30)]
        assert merged == 100
        assert reference_fifo_merge([(11, 80), (12, 50)], cap, 100) == \
            ([(11, 900, 80), (12, 980, 20)], [(12, 30)])

    def test_intrusion_into_reserve(self):
        f = DownstreamFrame((AllocationStructure(1, 0, 35000),))
        with pytest.raises(MalformedInput):
            merge_bwmap(f, queue_of((9, 1)), CAP, 3888)

    def test_zero_reserve_grants_nothing(self):
        out, q, merged = merge_bwmap(DownstreamFrame(), queue_of((9, 10)), CAP, 0)
        assert merged == 0 and len(q) == 1 and out.bwmap == ()


def _random_case(rng):
    cap = rng.randint(1, 2000)
    reserve = rng.randint(0, cap)
    floor = cap - reserve
    n = rng.randint(0, 8)
    cuts = sorted(rng.randint(0, floor) for _ in range(2 * n))
    bwmap = tuple(AllocationStructure(rng.randrange(1, 16384), cuts[i], cuts[i + 1] - cuts[i])
                  for i in range(0, len(cuts), 2))
    entries = [(rng.randrange(1, 16384), rng.randint(1, 300)) for _ in range(rng.randint(0, 10))]
    return cap, reserve, DownstreamFrame(bwmap, rng.randrange(1000)), entries


def test_merge_invariants_100k():
    rng = random.Random(3)
    for _ in range(100_000):
        cap, reserve, frame, entries = _random_case(rng)
        q = queue_of(*entries)
        out, q, merged = merge_bwmap(frame, q, cap, reserve)
        check_bwmap(out.bwmap, cap)
        n0 = len(frame.bwmap)
        assert out.bwmap[:n0] == frame.bwmap
        assert out.hlend.bwmap_len == len(out.bwmap)
        new = out.bwmap[n0:]
        assert merged == sum(a.grant_size for a in new) <= reserve
        assert all(a.start_time >= cap - reserve for a in new)
        assert all(a.grant_size > 0 and a.flags == FLAG_DBRU for a in new)
        assert q.ops <= 4 * (len(new) + 1)
        grants, leftover = reference_fifo_merge(entries, cap, reserve)
        assert [(a.alloc_id, a.start_time, a.grant_size) for a in new] == grants
        assert [(e.alloc_id, e.remaining_words) for e in q] == leftover


def test_prefix_bytes_preserved():
    rng = random.Random(4)
    for _ in range(2000):
        cap, reserve, frame, entries = _random_case(rng)
        out, _, _ = merge_bwmap(frame, queue_of(*entries), cap, reserve)
        a, b = encode_downstream(frame), encode_downstream(out)
        start = ENCAP_HEADER_LEN + HLEND_LEN
        end = start + ALLOC_RECORD_LEN * len(frame.bwmap)
        assert b[start:end] == a[start:end]
        assert b[:ENCAP_HEADER_LEN] == a[:ENCAP_HEADER_LEN]


def test_carry_over_conservation():
    rng = random.Random(6)
    for _ in range(300):
        entries = [(i, rng.randint(1, 400)) for i in range(rng.randint(1, 30))]
        q = queue_of(*entries)
        granted = {}
        for _ in range(200):
            reserve = rng.randint(0, 250)
            out, q, _ = merge_bwmap(DownstreamFrame(), q, 1000, reserve)
            for a in out.bwmap:
                granted[a.alloc_id] = granted.get(a.alloc_id, 0) + a.grant_size
            if not len(q):
                break
        assert not len(q)
        assert granted == dict(entries)


def test_conservation_with_overflow_counted():
    q = PendingQueue(capacity=3)
    offered = [(i, 10) for i in range(5)]
    for i, (a, w) in enumerate(offered):
        intercept(q, DbruReport(a, w), i)
    out, q, merged = merge_bwmap(DownstreamFrame(), q, 100, 100)
    assert merged + 10 * q.drops == sum(w for _, w in offered)
