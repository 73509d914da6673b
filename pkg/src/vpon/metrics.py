"""
Stage timestamps, latency summaries and CSV/JSON export.

Stages follow the demo pipeline: A created at the ONU, B parsed at the NIC,
C intercepted by the fast path or D ingested by the host DBA, E carried by a
departing downstream frame, then the grant reaching the ONU and the start of
the upstream transmission.

Samples CSV columns (fixed order, header is :data:`SAMPLE_CSV_HEADER`)::

    alloc_id, tcont_class, path, words, t_created, t_nic_parsed,
    t_intercepted, t_host_ingested, t_merged_or_mapped, t_grant_at_onu,
    t_tx_start, slip_frames

Empty cells stand for unset timestamps. Summary JSON carries
``schema_version`` (currently 1); see :meth:`Summary.to_dict`.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from .errors import InvalidSample, IoFailure

SCHEMA_VERSION = 1

PATH_FAST = "Fast"
PATH_HOST = "Host"
PATH_FIXED = "Fixed"

_TS_FIELDS = ("t_created", "t_nic_parsed", "t_intercepted", "t_host_ingested",
              "t_merged_or_mapped", "t_grant_at_onu", "t_tx_start")


@dataclass(slots=True)
class LatencySample:
    alloc_id: int
    tcont_class: str
    path: str
    words: int
    t_created: int
    t_nic_parsed: int | None = None
    t_intercepted: int | None = None
    t_host_ingested: int | None = None
    t_merged_or_mapped: int | None = None
    t_grant_at_onu: int | None = None
    t_tx_start: int | None = None
    slip_frames: int | None = None

    @property
    def grant_latency_ns(self):
        return self.t_grant_at_onu - self.t_created

    @property
    def service_latency_ns(self):
        return self.t_tx_start - self.t_created

    def validate(self):
        if self.path == PATH_FAST:
            if self.t_intercepted is None or self.t_host_ingested is not None:
                raise InvalidSample("fast-path sample needs t_intercepted only")
        elif self.path == PATH_HOST:
            if self.t_host_ingested is None or self.t_intercepted is not None:
                raise InvalidSample("host-path sample needs t_host_ingested only")
        elif self.path == PATH_FIXED:
            if self.t_intercepted is not None or self.t_host_ingested is not None:
                raise InvalidSample("fixed-allocation sample carries no C/D stage")
        else:
            raise InvalidSample(f"unknown path {self.path!r}")
        if self.t_grant_at_onu is None or self.t_tx_start is None:
            raise InvalidSample("sample incomplete")
        prev = None
        for name in _TS_FIELDS:
            t = getattr(self, name)
            if t is None:
                continue
            if prev is not None and t < prev[1]:
                raise InvalidSample(f"{name}={t} precedes {prev[0]}={prev[1]}")
            prev = (name, t)


SAMPLE_CSV_HEADER = ",".join(f.name for f in fields(LatencySample))


def nearest_rank(sorted_values, p):
    """Nearest-rank percentile of an ascending sequence."""
    n = len(sorted_values)
    rank = max(1, math.ceil(p / 100 * n))
    return sorted_values[rank - 1]


@dataclass
class Stats:
    count: int
    mean: float | None
    p50: float | None
    p95: float | None
    p99: float | None
    max: float | None

    @classmethod
    def of(cls, values):
        if len(values) == 0:
            return cls(0, None, None, None, None, None)
        a = np.sort(np.asarray(values, dtype=np.int64))
        return cls(len(a), float(a.mean()), *(int(nearest_rank(a, p)) for p in (50, 95, 99)),
                   int(a[-1]))


@dataclass
class GroupSummary:
    tcont_class: str
    path: str
    grant_latency_ns: Stats
    service_latency_ns: Stats
    stage_means_ns: dict


_STAGES = {
    "B->C": ("t_nic_parsed", "t_intercepted"),
    "B->D": ("t_nic_parsed", "t_host_ingested"),
    "D->E": ("t_host_ingested", "t_merged_or_mapped"),
    "C->E": ("t_intercepted", "t_merged_or_mapped"),
}


@dataclass
class Summary:
    groups: list
    drops: int = 0
    schema_version: int = SCHEMA_VERSION

    def group(self, tcont_class, path):
        for g in self.groups:
            if g.tcont_class == tcont_class and g.path == path:
                return g
        return None

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        if d.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported summary schema {d.get('schema_version')}")
        groups = [GroupSummary(g["tcont_class"], g["path"], Stats(**g["grant_latency_ns"]),
                               Stats(**g["service_latency_ns"]), g["stage_means_ns"])
                  for g in d["groups"]]
        return cls(groups, d["drops"], d["schema_version"])


class Metrics:
    """Collects samples for one run. Single writer."""

    def __init__(self, validate=True):
        self.samples = []
        self.drops = 0
        self._validate = validate

    def record(self, sample):
        if self._validate:
            sample.validate()
        self.samples.append(sample)

    def summarize(self):
        return summarize(self.samples, self.drops)


def summarize(samples, drops=0):
    by_key = {}
    for s in samples:
        by_key.setdefault((s.tcont_class, s.path), []).append(s)
    groups = []
    for (cls_, path), group in sorted(by_key.items()):
        stage_means = {}
        for name, (a, b) in _STAGES.items():
            d = [getattr(s, b) - getattr(s, a) for s in group
                 if getattr(s, a) is not None and getattr(s, b) is not None]
            if d:
                stage_means[name] = float(np.mean(d))
        groups.append(GroupSummary(
            cls_, path,
            Stats.of([s.grant_latency_ns for s in group]),
            Stats.of([s.service_latency_ns for s in group]),
            stage_means))
    return Summary(groups, drops)


def class_mean(samples, tcont_class, attr="grant_latency_ns"):
    v = [getattr(s, attr) for s in samples if s.tcont_class == tcont_class]
    return float(np.mean(v)) if v else None


def _opt(v):
    return "" if v is None else v


def export_samples_csv(samples, path):
    try:
        with open(path, "w", newline="") as f:
            f.write(SAMPLE_CSV_HEADER + "\n")
            w = csv.writer(f)
            w.writerows(
                (s.alloc_id, s.tcont_class, s.path, s.words, s.t_created, _opt(s.t_nic_parsed),
                 _opt(s.t_intercepted), _opt(s.t_host_ingested), _opt(s.t_merged_or_mapped),
                 _opt(s.t_grant_at_onu), _opt(s.t_tx_start), _opt(s.slip_frames))
                for s in samples)
    except OSError as e:
        raise IoFailure(str(e)) from e


def import_samples_csv(path):
    out = []
    with open(path, newline="") as f:
        r = csv.reader(f)
        header = next(r)
        if ",".join(header) != SAMPLE_CSV_HEADER:
            raise ValueError(f"unexpected samples header {header}")
        for row in r:
            ints = [None if c == "" else int(c) for c in row[3:]]
            out.append(LatencySample(int(row[0]), row[1], row[2], *ints))
    return out


SUMMARY_CSV_HEADER = ("tcont_class,path,metric,count,mean,p50,p95,p99,max")


def export_summary_csv(summary, path):
    try:
        with open(path, "w", newline="") as f:
            f.write(SUMMARY_CSV_HEADER + "\n")
            w = csv.writer(f)
            for g in summary.groups:
                for metric in ("grant_latency_ns", "service_latency_ns"):
                    st = getattr(g, metric)
                    w.writerow([g.tcont_class, g.path, metric, st.count, _opt(st.mean),
                                _opt(st.p50), _opt(st.p95), _opt(st.p99), _opt(st.max)])
    except OSError as e:
        raise IoFailure(str(e)) from e


def export_csv(obj, path):
    if isinstance(obj, Summary):
        export_summary_csv(obj, path)
    else:
        export_samples_csv(obj, path)


def export_json(summary, path, extra=None):
    doc = summary.to_dict() if isinstance(summary, Summary) else dict(summary)
    if extra:
        doc.update(extra)
    try:
        with open(path, "w") as f:
            json.dump(doc, f, indent=2, sort_keys=True)
    except OSError as e:
        raise IoFailure(str(e)) from e


def import_json(path):
    with open(path) as f:
        return Summary.from_dict(json.load(f))
