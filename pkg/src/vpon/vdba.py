"""
Host-resident virtual DBA.

Collects DBRu reports per cycle and turns them into a bandwidth map that
packs grants from word 0 and leaves the tail of the upstream frame
unallocated for the dataplane fast path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction

from .errors import ConfigError, UnknownAllocId, WrongClass
from .wire import FLAG_DBRU, AllocationStructure


class TcontClass(str, Enum):
    NORMAL = "Normal"
    LOW_LATENCY = "LowLatency"


@dataclass(frozen=True)
class Tcont:
    tcont_class: TcontClass
    onu_id: int = 0
    weight: int = 1


class TcontRegistry(dict):
    """Mapping alloc_id -> :class:`Tcont`, iterated in ascending alloc_id order."""

    def __init__(self, entries=()):
        super().__init__()
        items = entries.items() if isinstance(entries, dict) else entries
        for alloc_id, t in items:
            self.register(alloc_id, t)

    def register(self, alloc_id, tcont):
        if alloc_id in self:
            raise ConfigError(f"duplicate alloc_id {alloc_id}", "registry")
        if tcont.weight <= 0:
            raise ConfigError(f"weight must be positive for alloc_id {alloc_id}", "registry")
        self[alloc_id] = tcont

    def ids(self, tcont_class=None):
        return sorted(a for a, t in self.items()
                      if tcont_class is None or t.tcont_class == tcont_class)

    @property
    def low_latency_ids(self):
        return frozenset(self.ids(TcontClass.LOW_LATENCY))


class ReserveMode(str, Enum):
    FIXED = "Fixed"
    ADAPTIVE = "Adaptive"


def _rational(x):
    # str() first so 0.1 means one tenth, not its binary approximation
    return x if isinstance(x, Fraction) else Fraction(str(x))


@dataclass
class ReservePolicy:
    mode: ReserveMode = ReserveMode.FIXED
    fixed_fraction: Fraction = Fraction(1, 10)
    ewma_alpha: Fraction = Fraction(1, 2)
    min_words: int = 0
    max_words: int | None = None

    def __post_init__(self):
        self.mode = ReserveMode(self.mode)
        self.fixed_fraction = _rational(self.fixed_fraction)
        self.ewma_alpha = _rational(self.ewma_alpha)
        if not 0 <= self.fixed_fraction < 1:
            raise ConfigError("must lie in [0, 1)", "reserve_policy.fixed_fraction")
        if not 0 < self.ewma_alpha <= 1:
            raise ConfigError("must lie in (0, 1]", "reserve_policy.ewma_alpha")
        if self.min_words < 0:
            raise ConfigError("must be >= 0", "reserve_policy.min_words")
        if self.max_words is not None and self.min_words > self.max_words:
            raise ConfigError("min_words exceeds max_words", "reserve_policy.min_words")

    def bounds(self, capacity_words):
        hi = capacity_words if self.max_words is None else self.max_words
        if hi > capacity_words:
            raise ConfigError(f"{hi} exceeds frame capacity {capacity_words}",
                              "reserve_policy.max_words")
        return self.min_words, hi


@dataclass
class CycleState:
    pending_reports: dict = field(default_factory=dict)
    cycle_seq: int = 0
    reserve_demand_ewma: float = 0.0


def ingest_report(state, report, registry, *, allow_low_latency=False):
    """Record ``report`` in ``state`` (latest report per alloc_id wins)."""
    tcont = registry.get(report.alloc_id)
    if tcont is None:
        raise UnknownAllocId(f"alloc_id {report.alloc_id} not registered")
    if tcont.tcont_class is not TcontClass.NORMAL and not allow_low_latency:
        raise WrongClass(f"low-latency alloc_id {report.alloc_id} reached the host DBA")
    state.pending_reports[report.alloc_id] = report.occupancy_words
    return state


def update_reserve_demand(state, policy, ll_demand_words):
    """Fold one frame's observed low-latency demand into the EWMA."""
    a = float(policy.ewma_alpha)
    state.reserve_demand_ewma = a * ll_demand_words + (1.0 - a) * state.reserve_demand_ewma
    return state


def reserved_words(policy, state, capacity_words):
    lo, hi = policy.bounds(capacity_words)
    if policy.mode is ReserveMode.FIXED:
        want = math.floor(policy.fixed_fraction * capacity_words)
    else:
        want = math.ceil(state.reserve_demand_ewma)
    return max(lo, min(hi, want))


def _pack(grants):
    out = []
    cursor = 0
    for alloc_id, g in grants:
        if g:
            out.append(AllocationStructure(alloc_id, cursor, g, FLAG_DBRU))
            cursor += g
    return out


def weighted_grants(demands, weights, grantable):
    """Two-pass weighted split of ``grantable`` words.

    Pass one gives each id ``min(demand, floor(grantable * w / sum(w)))`` in
    ascending id order. Pass two hands the leftover to still-unsatisfied ids
    in the same order until demand or capacity runs out.
    """
    ids = sorted(demands)
    total_w = sum(weights[i] for i in ids)
    grants = {i: min(demands[i], grantable * weights[i] // total_w) for i in ids}
    left = grantable - sum(grants.values())
    for i in ids:
        if left <= 0:
            break
        extra = min(demands[i] - grants[i], left)
        grants[i] += extra
        left -= extra
    return grants


def compute_bwmap(state, registry, capacity_words, reserve):
    if not 0 <= reserve <= capacity_words:
        raise ValueError(f"reserve {reserve} outside [0, {capacity_words}]")
    demands = {a: occ for a, occ in state.pending_reports.items() if occ > 0}
    if not demands:
        return []
    weights = {a: registry[a].weight for a in demands}
    grants = weighted_grants(demands, weights, capacity_words - reserve)
    return _pack(sorted(grants.items()))


def compute_fixed_bwmap(registry, capacity_words):
    ids = registry.ids()
    if not ids:
        raise ValueError("fixed allocation needs at least one registered alloc_id")
    share, rem = divmod(capacity_words, len(ids))
    return _pack((a, share + (1 if k < rem else 0)) for k, a in enumerate(ids))
