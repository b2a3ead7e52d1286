"""Independent reference computations, deliberately written differently from
the package code they check."""

from __future__ import annotations

import itertools
from collections import deque

from catan_xdim.engine import TOPOLOGY


def longest_trail(roads: set[int], blocked: set[int]) -> int:
    """Breadth-first search over (vertex, used edges) states.

    A trail may start or end on a ``blocked`` vertex but never pass through
    one.
    """
    if not roads:
        return 0
    ends = {q: TOPOLOGY.path_ends[q] for q in roads}
    incident: dict[int, list[int]] = {}
    for q, (a, b) in ends.items():
        incident.setdefault(a, []).append(q)
        incident.setdefault(b, []).append(q)
    best = 0
    seen = set()
    frontier = deque((v, frozenset()) for v in incident)
    while frontier:
        v, used = frontier.popleft()
        if (v, used) in seen:
            continue
        seen.add((v, used))
        best = max(best, len(used))
        if used and v in blocked:
            continue
        for q in incident[v]:
            if q not in used:
                a, b = ends[q]
                frontier.append((b if a == v else a, used | {q}))
    return best


def raw_discard_count(max_per_type: int = 19, lo: int = 3, hi: int = 47) -> int:
    """Count 5-tuples by direct enumeration of the first four coordinates."""
    total = 0
    for b, l, o, g in itertools.product(range(max_per_type + 1), repeat=4):
        s = b + l + o + g
        # the fifth coordinate w must satisfy lo <= s + w <= hi, 0 <= w <= max
        w_lo = max(0, lo - s)
        w_hi = min(max_per_type, hi - s)
        if w_hi >= w_lo:
            total += w_hi - w_lo + 1
    return total


def keep_multisets() -> list[tuple[int, ...]]:
    """All 5-part compositions of 4, sorted descending lexicographically."""
    out = [c for c in itertools.product(range(5), repeat=5) if sum(c) == 4]
    return sorted(out, reverse=True)


def hex_boundary(h: int) -> tuple[set[int], set[int]]:
    return set(TOPOLOGY.hex_intersections[h]), set(TOPOLOGY.hex_paths[h])
