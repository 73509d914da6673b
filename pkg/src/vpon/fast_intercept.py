"""
Dataplane model of the fast path.

Low-latency DBRus are classified by alloc_id, held in a bounded FIFO and
granted into the reserved tail of the next downstream bandwidth map. The
merge walks the queue once and uses only integer add/compare, as a P4
pipeline would.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from enum import Enum

from .errors import MalformedInput
from .wire import FLAG_DBRU, AllocationStructure, DownstreamFrame, HLend


class Route(str, Enum):
    FAST = "FastPath"
    HOST = "HostPath"


@dataclass(frozen=True)
class ClassifierTable:
    low_latency_ids: frozenset = frozenset()

    @classmethod
    def from_registry(cls, registry):
        return cls(registry.low_latency_ids)


def classify(report, table):
    return Route.FAST if report.alloc_id in table.low_latency_ids else Route.HOST


@dataclass(slots=True)
class PendingEntry:
    alloc_id: int
    remaining_words: int
    intercepted_at_ns: int


class PendingQueue:
    """Bounded FIFO of held requests. Overflow drops the newest request."""

    def __init__(self, capacity=1024):
        self.capacity = capacity
        self.entries = deque()
        self.drops = 0
        self.ops = 0  # operations spent by the most recent merge

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def total_words(self):
        return sum(e.remaining_words for e in self.entries)


def intercept(queue, report, now_ns):
    if report.occupancy_words <= 0:
        return queue
    if len(queue.entries) >= queue.capacity:
        queue.drops += 1
        return queue
    queue.entries.append(PendingEntry(report.alloc_id, report.occupancy_words, now_ns))
    return queue


def merge_bwmap(frame, queue, capacity_words, reserve):
    """Append grants for held requests into ``[capacity - reserve, capacity)``.

    Returns ``(new_frame, queue, merged_words)``. The queue is updated in
    place: fully granted entries leave it, a partially granted head entry
    keeps its unserved remainder. ``queue.ops`` counts the add/compare
    operations spent, at most ``4 * (entries granted + 1)``.
    """
    bwmap = frame.bwmap
    floor = capacity_words - reserve
    if bwmap and bwmap[-1].end > floor:
        raise MalformedInput(
            f"alloc_id {bwmap[-1].alloc_id} ends at {bwmap[-1].end}, "
            f"inside reserved region starting at {floor}")

    entries = queue.entries
    cursor = floor
    left = reserve
    ops = 1
    added = []
    while entries and left > 0:
        ops += 1
        head = entries[0]
        ops += 1
        if head.remaining_words <= left:
            g = head.remaining_words
            entries.popleft()
            left -= g
        else:
            g = left
            head.remaining_words -= g
            left = 0
        ops += 2
        added.append(AllocationStructure(head.alloc_id, cursor, g, FLAG_DBRU))
        cursor += g
    ops += 1
    queue.ops = ops

    if not added:
        return frame, queue, 0
    merged = DownstreamFrame(bwmap + tuple(added), frame.frame_seq, frame.payload_len,
                             HLend(len(bwmap) + len(added)))
    return merged, queue, reserve - left
