"""Independent reference implementations used as test oracles.

These follow the scheduling rules word by word and share no code with the
package allocators.
"""


def reference_bwmap(demands, weights, grantable):
    """Two-pass weighted allocation, one word at a time.

    Returns a list of ``(alloc_id, start, size)`` packed from word 0.
    """
    ids = sorted(a for a, d in demands.items() if d > 0)
    total_w = sum(weights[a] for a in ids)
    grants = {}
    for a in ids:
        g = 0
        # largest g with g <= demand and g / grantable <= w / total_w
        while g < demands[a] and (g + 1) * total_w <= grantable * weights[a]:
            g += 1
        grants[a] = g
    left = grantable - sum(grants.values())
    for a in ids:
        while left > 0 and grants[a] < demands[a]:
            grants[a] += 1
            left -= 1
    out, start = [], 0
    for a in ids:
        if grants[a]:
            out.append((a, start, grants[a]))
            start += grants[a]
    return out


def reference_fifo_merge(queue, capacity, reserve):
    """Word-by-word FIFO packing of ``[(alloc_id, words), ...]`` into the
    reserved tail. Returns ``(grants, leftover_queue)``."""
    slots = list(range(capacity - reserve, capacity))
    grants = []
    leftover = []
    for alloc_id, words in queue:
        given = []
        while words and slots:
            given.append(slots.pop(0))
            words -= 1
        if given:
            grants.append((alloc_id, given[0], len(given)))
        if words:
            leftover.append((alloc_id, words))
    return grants, leftover
