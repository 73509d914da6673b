"""
Deterministic discrete-event simulator of one virtual OLT and its ONUs.

Timeline of frame ``k`` (``T`` = frame period)::

    k*T                     host DBA computes the BWMAP for frame k
    (k+1)*T - fast_merge    NIC assembles frame k (fast path merges here)
    (k+1)*T                 frame k departs the NIC
    (k+1)*T + prop + apply  ONUs hold the grants of frame k

A host BWMAP that is not back at the NIC by assembly time rides the next
frame instead. Each arrival at an ONU emits one DBRu reporting the T-CONT
backlog not yet covered by grants the ONU has seen. Both the host DBA and
the NIC subtract grants still in flight (issued but not yet seen by the
ONU when it reported), so a backlog is never granted twice.

Events at equal timestamps run in kind order, then alloc_id, then
insertion order.
"""

from __future__ import annotations

import hashlib
import heapq
import math
import struct
import time
from collections import deque
from dataclasses import dataclass, field, fields

from .errors import ConfigError
from .fast_intercept import ClassifierTable, PendingQueue, Route, classify, intercept, merge_bwmap
from .metrics import PATH_FAST, PATH_FIXED, PATH_HOST, LatencySample, Metrics, class_mean
from .pcap import PcapWriter
from .scenario import Mode
from .traffic import RNG_ALGORITHM, make_rng, next_event
from .vdba import (
    CycleState,
    TcontClass,
    compute_bwmap,
    compute_fixed_bwmap,
    ingest_report,
    reserved_words,
    update_reserve_demand,
)
from .wire import MAX_OCCUPANCY, DbruReport, DownstreamFrame, check_bwmap, encode_dbru, encode_downstream

GRANT_RX, ARRIVAL, NIC_RX, HOST_RX, HOST_CYCLE, BWMAP_READY, ASSEMBLE, DEPART = range(8)
EVENT_NAMES = ("GRANT_RX", "ARRIVAL", "NIC_RX", "HOST_RX", "HOST_CYCLE", "BWMAP_READY",
               "ASSEMBLE", "DEPART")

_TRACE_REC = struct.Struct("<qBqq")
_INF = math.inf


class _Ledger:
    """Grants issued per alloc_id with the time the ONU sees them."""

    def __init__(self):
        self._by_id = {}

    def add(self, alloc_id, words, t_rx=_INF):
        entry = [t_rx, words]
        self._by_id.setdefault(alloc_id, deque()).append(entry)
        return entry

    def unseen(self, alloc_id, reported_at):
        q = self._by_id.get(alloc_id)
        if not q:
            return 0
        while q and q[0][0] <= reported_at:
            q.popleft()
        return sum(e[1] for e in q)


@dataclass(slots=True)
class _Burst:
    uncovered: int
    sample: LatencySample


@dataclass
class SimReport:
    mode: str
    frames_emitted: int
    samples: list
    summary: object
    trace_hash: str
    events: int
    drops: int = 0
    incomplete: int = 0
    host_map_slips: int = 0
    overlap_violations: int = 0
    merge_ops_violations: int = 0
    offered_words: dict = field(default_factory=dict)
    granted_words: dict = field(default_factory=dict)
    used_words: dict = field(default_factory=dict)
    reserved_words_total: int = 0
    merged_words_total: int = 0
    rng_algorithm: str = RNG_ALGORITHM
    wall_s: float = 0.0
    trace: list | None = None

    def utilization(self, tcont_class):
        g = self.granted_words.get(tcont_class, 0)
        return self.used_words.get(tcont_class, 0) / g if g else None

    def mean_grant_latency(self, tcont_class):
        return class_mean(self.samples, tcont_class)

    def to_dict(self):
        d = {f.name: getattr(self, f.name) for f in fields(self)
             if f.name not in ("samples", "summary", "trace")}
        d["summary"] = self.summary.to_dict()
        d["class_mean_grant_latency_ns"] = {c.value: self.mean_grant_latency(c.value)
                                            for c in TcontClass}
        return d


class Simulator:
    def __init__(self, scenario, *, pcap=None, keep_trace=False, validate_samples=True):
        sc = scenario
        sc.validate()
        d = sc.delays
        if d.fast_merge_ns >= sc.frame_period_ns:
            raise ConfigError("must be shorter than the frame period", "delays.fast_merge_ns")
        self.sc = sc
        self.T = sc.frame_period_ns
        self.cap = sc.capacity_words
        self.d = d
        self.mode = sc.mode
        self.lead = d.fast_merge_ns if sc.mode is Mode.FAST_INTERCEPT else 0
        self.table = ClassifierTable.from_registry(sc.registry) \
            if sc.mode is Mode.FAST_INTERCEPT else ClassifierTable()
        self.metrics = Metrics(validate=validate_samples)
        self.queue = PendingQueue(sc.queue_capacity)
        self.state = CycleState()
        self.fixed_bwmap = tuple(compute_fixed_bwmap(sc.registry, self.cap)) \
            if sc.mode is Mode.FIXED_ALLOCATION else None

        self._owns_pcap = pcap is not None and not isinstance(pcap, PcapWriter)
        self.pcap = PcapWriter(pcap) if self._owns_pcap else pcap

        self._heap = []
        self._seq = 0
        self._hash = hashlib.blake2b(digest_size=8)
        self.trace = [] if keep_trace else None

        self._classes = {a: t.tcont_class.value for a, t in sc.registry.items()}
        self._bursts = {a: deque() for a in sc.registry}
        self._backlog = dict.fromkeys(sc.registry, 0)
        self._rngs = {}
        self._queued = dict.fromkeys(sc.registry, 0)
        self._nic_ledger = _Ledger()
        self._host_ledger = _Ledger()
        self._report_time = {}
        self._ready = deque()
        self._assembled = None
        self._prev_abs_end = -1

        self.frames_emitted = 0
        self.events = 0
        self.host_map_slips = 0
        self.overlap_violations = 0
        self.merge_ops_violations = 0
        self.reserved_total = 0
        self.merged_total = 0
        self.offered = {c.value: 0 for c in TcontClass}
        self.granted = {c.value: 0 for c in TcontClass}
        self.used = {c.value: 0 for c in TcontClass}

    def _push(self, ts, kind, key=-1, a=None, b=None):
        self._seq += 1
        heapq.heappush(self._heap, (ts, kind, key, self._seq, a, b))

    def _offset_ns(self, words):
        return words * self.T // self.cap

    def _schedule_frame(self, k):
        if k >= self.sc.n_frames:
            return
        depart = (k + 1) * self.T
        if self.mode is not Mode.FIXED_ALLOCATION:
            self._push(k * self.T, HOST_CYCLE, -1, k)
        self._push(depart - self.lead, ASSEMBLE, -1, k)
        self._push(depart, DEPART, -1, k)

    def _next_arrival(self, alloc_id, now):
        proc = self.sc.traffic[alloc_id]
        words, at, _ = next_event(proc, self._rngs[alloc_id], now)
        if at <= self.sc.duration_ns:
            self._push(at, ARRIVAL, alloc_id, words)

    def run(self):
        t0 = time.perf_counter()
        for a in sorted(self.sc.traffic):
            self._rngs[a] = make_rng(self.sc.traffic[a].seed, a)
            self._next_arrival(a, 0)
        self._schedule_frame(0)

        handlers = (self._on_grant_rx, self._on_arrival, self._on_nic_rx, self._on_host_rx,
                    self._on_host_cycle, self._on_bwmap_ready, self._on_assemble, self._on_depart)
        heap = self._heap
        end = self.sc.duration_ns
        pack = _TRACE_REC.pack
        h = self._hash
        trace = self.trace
        while heap and heap[0][0] <= end:
            ts, kind, key, _, a, b = heapq.heappop(heap)
            self.events += 1
            fseq = a if kind >= HOST_CYCLE or kind == GRANT_RX else -1
            h.update(pack(ts, kind, key, fseq))
            if trace is not None:
                trace.append((ts, EVENT_NAMES[kind], None if key < 0 else key,
                              None if fseq < 0 else fseq))
            handlers[kind](ts, key, a, b)

        if self._owns_pcap:
            self.pcap.close()
        incomplete = sum(len(q) for q in self._bursts.values())
        return SimReport(
            mode=self.mode.value,
            frames_emitted=self.frames_emitted,
            samples=self.metrics.samples,
            summary=self.metrics.summarize(),
            trace_hash=h.hexdigest(),
            events=self.events,
            drops=self.queue.drops,
            incomplete=incomplete,
            host_map_slips=self.host_map_slips,
            overlap_violations=self.overlap_violations,
            merge_ops_violations=self.merge_ops_violations,
            offered_words=self.offered,
            granted_words=self.granted,
            used_words=self.used,
            reserved_words_total=self.reserved_total,
            merged_words_total=self.merged_total,
            wall_s=time.perf_counter() - t0,
            trace=trace,
        )

    # stage A: a burst arrives at the ONU and a DBRu goes upstream
    def _on_arrival(self, now, alloc_id, words, _):
        cls_ = self._classes[alloc_id]
        self.offered[cls_] += words
        sample = LatencySample(alloc_id, cls_, PATH_FIXED, words, now)
        self._bursts[alloc_id].append(_Burst(words, sample))
        self._backlog[alloc_id] += words
        if self.mode is not Mode.FIXED_ALLOCATION:
            report = DbruReport(alloc_id, min(self._backlog[alloc_id], MAX_OCCUPANCY), now)
            self._push(now + self.d.prop_delay_ns + self.d.nic_parse_ns, NIC_RX, alloc_id,
                       report, sample)
        self._next_arrival(alloc_id, now)

    # stages B and C: parsed by the NIC, then held or relayed to the host
    def _on_nic_rx(self, now, alloc_id, report, sample):
        sample.t_nic_parsed = now
        if self.pcap is not None:
            self.pcap.append(encode_dbru(report), now)
        if classify(report, self.table) is Route.FAST:
            sample.path = PATH_FAST
            sample.t_intercepted = now
            want = (report.occupancy_words - self._queued[alloc_id]
                    - self._nic_ledger.unseen(alloc_id, report.created_at_ns))
            if want > 0:
                before = len(self.queue)
                intercept(self.queue, DbruReport(alloc_id, want, report.created_at_ns), now)
                if len(self.queue) > before:
                    self._queued[alloc_id] += want
                else:
                    self.metrics.drops += 1
        else:
            sample.path = PATH_HOST
            self._push(now + self.d.nic_to_host_ns, HOST_RX, alloc_id, report, sample)

    # stage D: the host DBA ingests the report
    def _on_host_rx(self, now, alloc_id, report, sample):
        sample.t_host_ingested = now
        ingest_report(self.state, report, self.sc.registry,
                      allow_low_latency=self.mode is not Mode.FAST_INTERCEPT)
        self._report_time[alloc_id] = report.created_at_ns

    def _on_host_cycle(self, now, _key, k, _):
        pending = self.state.pending_reports
        effective = CycleState(cycle_seq=self.state.cycle_seq,
                               reserve_demand_ewma=self.state.reserve_demand_ewma)
        for a in sorted(pending):
            want = pending[a] - self._host_ledger.unseen(a, self._report_time[a])
            if want > 0:
                effective.pending_reports[a] = want
            else:
                del pending[a]
        if self.mode is Mode.FAST_INTERCEPT:
            reserve = reserved_words(self.sc.reserve_policy, self.state, self.cap)
        else:
            reserve = 0
        bwmap = compute_bwmap(effective, self.sc.registry, self.cap, reserve)
        handles = [self._host_ledger.add(x.alloc_id, x.grant_size) for x in bwmap]
        self.state.cycle_seq += 1
        ready = now + self.d.host_dba_compute_ns + self.d.host_to_nic_ns
        self._push(ready, BWMAP_READY, -1, k, (tuple(bwmap), reserve, handles))

    def _on_bwmap_ready(self, now, _key, k, payload):
        self._ready.append((k, *payload))

    # stage E: the NIC builds frame k, merging held low-latency requests
    def _on_assemble(self, now, _key, k, _):
        depart = (k + 1) * self.T
        t_rx = depart + self.d.prop_delay_ns + self.d.onu_grant_apply_ns
        if self.mode is Mode.FIXED_ALLOCATION:
            bwmap, reserve, handles = self.fixed_bwmap, 0, ()
        elif self._ready:
            computed_for, bwmap, reserve, handles = self._ready.popleft()
            self.host_map_slips += k - computed_for
        else:
            bwmap, handles = (), ()
            reserve = (reserved_words(self.sc.reserve_policy, self.state, self.cap)
                       if self.mode is Mode.FAST_INTERCEPT else 0)
        for hnd in handles:
            hnd[0] = t_rx
        frame = DownstreamFrame(bwmap, k)
        if self.mode is Mode.FAST_INTERCEPT:
            self.reserved_total += reserve
            demand = sum(self._queued.values())
            n_before = len(bwmap)
            frame, _, merged = merge_bwmap(frame, self.queue, self.cap, reserve)
            added = frame.bwmap[n_before:]
            if self.queue.ops > 4 * (len(added) + 1):
                self.merge_ops_violations += 1
            for x in added:
                self._queued[x.alloc_id] -= x.grant_size
                self._nic_ledger.add(x.alloc_id, x.grant_size, t_rx)
            self.merged_total += merged
            update_reserve_demand(self.state, self.sc.reserve_policy, demand)
        self._assembled = frame

    def _on_depart(self, now, _key, k, _):
        frame = self._assembled
        self.frames_emitted += 1
        try:
            check_bwmap(frame.bwmap, self.cap)
        except Exception:
            self.overlap_violations += 1
        t_rx = now + self.d.prop_delay_ns + self.d.onu_grant_apply_ns
        if frame.bwmap:
            first = t_rx + self._offset_ns(frame.bwmap[0].start_time)
            if first < self._prev_abs_end:
                self.overlap_violations += 1
            self._prev_abs_end = t_rx + self._offset_ns(frame.bwmap[-1].end)
        if self.pcap is not None:
            self.pcap.append(encode_downstream(frame), now)
        self._push(t_rx, GRANT_RX, -1, k, (frame, now))
        self._schedule_frame(k + 1)

    def _first_eligible(self, s):
        if s.path == PATH_FAST:
            return max(0, -(-(s.t_intercepted + self.lead) // self.T) - 1)
        if s.path == PATH_HOST:
            return -(-s.t_host_ingested // self.T)
        lag = self.d.prop_delay_ns + self.d.onu_grant_apply_ns
        return max(0, -(-(s.t_created - lag) // self.T) - 1)

    # ONUs receive frame k and spend the grants on their oldest backlog
    def _on_grant_rx(self, now, _key, k, payload):
        frame, departed = payload
        for alloc in frame.bwmap:
            a = alloc.alloc_id
            cls_ = self._classes[a]
            self.granted[cls_] += alloc.grant_size
            bursts = self._bursts.get(a)
            cover = min(alloc.grant_size, self._backlog.get(a, 0))
            if not cover:
                continue
            self.used[cls_] += cover
            self._backlog[a] -= cover
            consumed = 0
            left = cover
            while left:
                b = bursts[0]
                take = min(b.uncovered, left)
                if take == b.uncovered:
                    bursts.popleft()
                    s = b.sample
                    s.t_grant_at_onu = now
                    s.t_tx_start = now + self._offset_ns(alloc.start_time + consumed)
                    if s.path != PATH_FIXED:
                        s.t_merged_or_mapped = departed
                    s.slip_frames = k - self._first_eligible(s)
                    self.metrics.record(s)
                else:
                    b.uncovered -= take
                consumed += take
                left -= take


def run(scenario, sinks=None, **kw):
    """Run ``scenario`` and return a :class:`SimReport`.

    ``sinks`` may carry ``pcap`` (path or :class:`PcapWriter`).
    """
    sinks = sinks or {}
    return Simulator(scenario, pcap=sinks.get("pcap"), **kw).run()


@dataclass
class ComparisonReport:
    labels: list
    reports: dict
    mean_grant_latency_ns: dict
    deltas_ns: dict

    def to_dict(self):
        return {
            "labels": self.labels,
            "mean_grant_latency_ns": self.mean_grant_latency_ns,
            "deltas_ns": self.deltas_ns,
            "runs": {lbl: r.to_dict() for lbl, r in self.reports.items()},
        }


def _same_except_mode(a, b):
    for f in fields(a):
        if f.name != "mode" and getattr(a, f.name) != getattr(b, f.name):
            return f.name
    return None


def compare(scenarios, **kw):
    """Run scenarios that differ only in mode and diff their per-class means.

    Deltas are ``baseline mean - run mean`` with the first scenario as
    baseline, so a positive delta means the run is faster.
    """
    if not scenarios:
        raise ConfigError("nothing to compare")
    base = scenarios[0]
    for sc in scenarios[1:]:
        diff = _same_except_mode(base, sc)
        if diff:
            raise ConfigError("scenarios may differ only in mode", diff)
    labels, reports = [], {}
    for sc in scenarios:
        label = sc.mode.value
        n = 2
        while label in reports:
            label = f"{sc.mode.value}#{n}"
            n += 1
        labels.append(label)
        reports[label] = run(sc, **kw)
    means = {lbl: {c.value: r.mean_grant_latency(c.value) for c in TcontClass}
             for lbl, r in reports.items()}
    base_means = means[labels[0]]
    deltas = {}
    for lbl in labels:
        deltas[lbl] = {c: (None if base_means[c] is None or means[lbl][c] is None
                           else base_means[c] - means[lbl][c]) for c in base_means}
    return ComparisonReport(labels, reports, means, deltas)
