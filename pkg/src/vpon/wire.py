"""
Bit-exact codec for Ethernet-encapsulated downstream frames and DBRu bursts.

Layout (all multi-byte fields big-endian)::

    encapsulation header, 19 bytes
        dst MAC (6) | src MAC (6) | ethertype (2) | kind (1) | seq (4)
    downstream body (kind 0)
        HLend (2): bwmap_len:11 | pad:5
        bwmap_len x allocation record (8):
            alloc_id:14 | flags:2 | start_time:16 | grant_size:16 | reserved:16
        payload_len zero bytes
    DBRu body (kind 1), 13 bytes
        alloc_id:14 | pad:2 | occupancy_words:24 | created_at_ns:64

``seq`` carries the downstream frame sequence number and is zero for DBRu
bursts. Start times and grant sizes are counted in 4-byte words.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

from .errors import (
    BadEthertype,
    InvariantViolation,
    MalformedBwmap,
    TruncatedFrame,
    WrongKind,
)

WORD_BYTES = 4
DEFAULT_ETHERTYPE = 0x88B5
BROADCAST_MAC = b"\xff" * 6
OLT_MAC = bytes.fromhex("020000000001")
ONU_MAC = bytes.fromhex("020000000002")

KIND_DOWNSTREAM = 0
KIND_DBRU = 1

FLAG_DBRU = 0x1

ENCAP_HEADER_LEN = 19
HLEND_LEN = 2
ALLOC_RECORD_LEN = 8
DBRU_BODY_LEN = 13

MAX_ALLOC_ID = (1 << 14) - 1
MAX_BWMAP_LEN = (1 << 11) - 1
MAX_WORD_FIELD = (1 << 16) - 1
MAX_OCCUPANCY = (1 << 24) - 1

_HEADER = struct.Struct(">6s6sHBI")
_ALLOC = struct.Struct(">HHHH")


@dataclass(frozen=True)
class AllocationStructure:
    alloc_id: int
    start_time: int
    grant_size: int
    flags: int = FLAG_DBRU

    def __post_init__(self):
        if not 0 <= self.alloc_id <= MAX_ALLOC_ID:
            raise InvariantViolation(f"alloc_id {self.alloc_id} out of 14-bit range")
        if not 0 <= self.flags <= 3:
            raise InvariantViolation(f"flags {self.flags} out of 2-bit range")
        if not 0 <= self.start_time <= MAX_WORD_FIELD:
            raise InvariantViolation(f"start_time {self.start_time} out of 16-bit range")
        if not 0 <= self.grant_size <= MAX_WORD_FIELD:
            raise InvariantViolation(f"grant_size {self.grant_size} out of 16-bit range")

    @property
    def end(self):
        return self.start_time + self.grant_size


@dataclass(frozen=True)
class HLend:
    bwmap_len: int

    def __post_init__(self):
        if not 0 <= self.bwmap_len <= MAX_BWMAP_LEN:
            raise InvariantViolation(f"bwmap_len {self.bwmap_len} out of 11-bit range")


@dataclass(frozen=True)
class DownstreamFrame:
    bwmap: tuple = ()
    frame_seq: int = 0
    payload_len: int = 0
    hlend: HLend = field(default=None)

    def __post_init__(self):
        if not isinstance(self.bwmap, tuple):
            object.__setattr__(self, "bwmap", tuple(self.bwmap))
        if self.hlend is None:
            object.__setattr__(self, "hlend", HLend(len(self.bwmap)))


@dataclass(frozen=True)
class DbruReport:
    alloc_id: int
    occupancy_words: int
    created_at_ns: int = 0

    def __post_init__(self):
        if not 0 <= self.alloc_id <= MAX_ALLOC_ID:
            raise InvariantViolation(f"alloc_id {self.alloc_id} out of 14-bit range")
        if not 0 <= self.occupancy_words <= MAX_OCCUPANCY:
            raise InvariantViolation(f"occupancy {self.occupancy_words} out of 24-bit range")


@dataclass(frozen=True)
class EthEncapHeader:
    dst: bytes = BROADCAST_MAC
    src: bytes = OLT_MAC
    ethertype: int = DEFAULT_ETHERTYPE
    kind: int = KIND_DOWNSTREAM
    seq: int = 0

    def pack(self):
        return _HEADER.pack(self.dst, self.src, self.ethertype, self.kind, self.seq)

    @classmethod
    def unpack(cls, data, ethertype=DEFAULT_ETHERTYPE):
        if len(data) < ENCAP_HEADER_LEN:
            raise TruncatedFrame(f"{len(data)} bytes, header needs {ENCAP_HEADER_LEN}")
        dst, src, etype, kind, seq = _HEADER.unpack_from(data)
        if etype != ethertype:
            raise BadEthertype(f"ethertype 0x{etype:04x}, expected 0x{ethertype:04x}")
        return cls(dst, src, etype, kind, seq)


def check_bwmap(bwmap, capacity_words=None, exc=MalformedBwmap):
    """Raise ``exc`` unless ``bwmap`` is sorted, non-overlapping and in capacity."""
    prev_end = None
    prev_start = None
    for a in bwmap:
        if prev_start is not None:
            if a.start_time < prev_start:
                raise exc(f"bwmap unsorted at alloc_id {a.alloc_id}")
            if a.start_time < prev_end:
                raise exc(f"alloc_id {a.alloc_id} overlaps previous allocation")
        if capacity_words is not None and a.end > capacity_words:
            raise exc(f"alloc_id {a.alloc_id} ends at {a.end} > capacity {capacity_words}")
        prev_start, prev_end = a.start_time, a.end


def encoded_length(frame):
    return ENCAP_HEADER_LEN + HLEND_LEN + ALLOC_RECORD_LEN * len(frame.bwmap) + frame.payload_len


def pack_alloc(a):
    return _ALLOC.pack((a.alloc_id << 2) | a.flags, a.start_time, a.grant_size, 0)


def encode_downstream(frame, *, ethertype=DEFAULT_ETHERTYPE, src=OLT_MAC, dst=BROADCAST_MAC):
    if frame.hlend.bwmap_len != len(frame.bwmap):
        raise InvariantViolation(
            f"hlend.bwmap_len={frame.hlend.bwmap_len} but bwmap has {len(frame.bwmap)} entries")
    if frame.payload_len < 0:
        raise InvariantViolation("negative payload_len")
    check_bwmap(frame.bwmap, exc=InvariantViolation)
    parts = [
        EthEncapHeader(dst, src, ethertype, KIND_DOWNSTREAM, frame.frame_seq).pack(),
        (frame.hlend.bwmap_len << 5).to_bytes(2, "big"),
    ]
    parts.extend(pack_alloc(a) for a in frame.bwmap)
    parts.append(bytes(frame.payload_len))
    return b"".join(parts)


def decode_downstream(data, *, ethertype=DEFAULT_ETHERTYPE, capacity_words=None):
    data = bytes(data)
    hdr = EthEncapHeader.unpack(data, ethertype)
    if hdr.kind != KIND_DOWNSTREAM:
        raise WrongKind(f"kind {hdr.kind} is not a downstream frame")
    off = ENCAP_HEADER_LEN
    if len(data) < off + HLEND_LEN:
        raise TruncatedFrame("missing HLend")
    n = int.from_bytes(data[off:off + HLEND_LEN], "big") >> 5
    off += HLEND_LEN
    need = off + n * ALLOC_RECORD_LEN
    if len(data) < need:
        raise TruncatedFrame(f"HLend announces {n} allocations, only "
                             f"{(len(data) - off) // ALLOC_RECORD_LEN} complete records present")
    bwmap = []
    for _ in range(n):
        head, start, size, _reserved = _ALLOC.unpack_from(data, off)
        bwmap.append(AllocationStructure(head >> 2, start, size, head & 0x3))
        off += ALLOC_RECORD_LEN
    check_bwmap(bwmap, capacity_words)
    return DownstreamFrame(tuple(bwmap), hdr.seq, len(data) - off)


def encode_dbru(report, *, ethertype=DEFAULT_ETHERTYPE, src=ONU_MAC, dst=OLT_MAC):
    return b"".join((
        EthEncapHeader(dst, src, ethertype, KIND_DBRU, 0).pack(),
        (report.alloc_id << 2).to_bytes(2, "big"),
        report.occupancy_words.to_bytes(3, "big"),
        report.created_at_ns.to_bytes(8, "big"),
    ))


def decode_dbru(data, *, ethertype=DEFAULT_ETHERTYPE):
    data = bytes(data)
    hdr = EthEncapHeader.unpack(data, ethertype)
    if hdr.kind != KIND_DBRU:
        raise WrongKind(f"kind {hdr.kind} is not a DBRu burst")
    off = ENCAP_HEADER_LEN
    if len(data) < off + DBRU_BODY_LEN:
        raise TruncatedFrame(f"DBRu body needs {DBRU_BODY_LEN} bytes, got {len(data) - off}")
    alloc_id = int.from_bytes(data[off:off + 2], "big") >> 2
    occupancy = int.from_bytes(data[off + 2:off + 5], "big")
    created = int.from_bytes(data[off + 5:off + 13], "big")
    return DbruReport(alloc_id, occupancy, created)
