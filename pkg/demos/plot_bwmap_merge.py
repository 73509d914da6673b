"""
Merging fast-path grants into a host bandwidth map
==================================================

The host DBA packs normal grants from word 0 and leaves the tail of the
upstream frame free. Held low-latency requests are then appended into that
tail, and the result is encoded as it would travel downstream.
"""

from vpon.fast_intercept import PendingQueue, intercept, merge_bwmap
from vpon.vdba import (CycleState, ReservePolicy, Tcont, TcontClass, TcontRegistry,
                       compute_bwmap, reserved_words)
from vpon.wire import DbruReport, DownstreamFrame, decode_downstream, encode_downstream

CAPACITY = 38880  # words in one 125 us upstream frame at 9.95328 Gb/s

registry = TcontRegistry({
    100: Tcont(TcontClass.NORMAL, onu_id=1),
    200: Tcont(TcontClass.NORMAL, onu_id=2),
    9000: Tcont(TcontClass.LOW_LATENCY, onu_id=1),
})

# two normal T-CONTs asking for more than the frame can hold
state = CycleState({100: 30000, 200: 30000})
reserve = reserved_words(ReservePolicy(fixed_fraction=0.1), state, CAPACITY)
host_map = compute_bwmap(state, registry, CAPACITY, reserve)
print(f"reserve = {reserve} words")
for a in host_map:
    print("host  ", a)

# a low-latency DBRu intercepted on its way to the host
queue = intercept(PendingQueue(), DbruReport(9000, 120), now_ns=0)
frame, queue, merged = merge_bwmap(DownstreamFrame(tuple(host_map), frame_seq=1),
                                   queue, CAPACITY, reserve)
print(f"merged {merged} words using {queue.ops} dataplane operations")
for a in frame.bwmap[len(host_map):]:
    print("fast  ", a)

wire = encode_downstream(frame)
print(f"{len(wire)} bytes on the wire:", wire.hex(" ", -8))
assert decode_downstream(wire) == frame
