"""Backtracking enumeration of subgraph matches along a fixed order."""

from __future__ import annotations

import sys
import time
from dataclasses import dataclass, field
from typing import Sequence

from .filtering import CandidateSets
from .graph import LabeledGraph
from .ordering import is_connected_order, is_valid_order

__all__ = [
    "EnumResult",
    "Limits",
    "enumerate_matches",
    "compute_local_candidates",
    "is_match",
    "EXHAUSTED",
    "MATCH_LIMIT",
    "TIME_LIMIT",
    "DEFAULT_MATCH_LIMIT",
    "DEFAULT_TIME_LIMIT",
]

EXHAUSTED = "exhausted"
MATCH_LIMIT = "match_limit"
TIME_LIMIT = "time_limit"

DEFAULT_MATCH_LIMIT = 100_000
DEFAULT_TIME_LIMIT = 500.0

# The clock is read once every 2**TIME_CHECK_SHIFT recursive calls.
TIME_CHECK_SHIFT = 10
_TIME_MASK = (1 << TIME_CHECK_SHIFT) - 1


@dataclass(frozen=True)
class Limits:
    match_limit: int | None = DEFAULT_MATCH_LIMIT
    time_limit: float | None = DEFAULT_TIME_LIMIT

    @classmethod
    def unlimited(cls) -> "Limits":
        return cls(None, None)


@dataclass
class EnumResult:
    match_count: int
    enum_calls: int
    elapsed: float
    terminated_by: str
    matches: list[dict[int, int]] | None = field(default=None, repr=False)

    @property
    def solved(self) -> bool:
        return self.terminated_by != TIME_LIMIT


class _Stop(Exception):
    pass


def is_match(q: LabeledGraph, g: LabeledGraph, mapping: dict[int, int]) -> bool:
    """Injective, label- and edge-preserving total mapping check."""
    if sorted(mapping) != list(range(q.vertex_count)):
        return False
    if len(set(mapping.values())) != len(mapping):
        return False
    for u, v in mapping.items():
        if not 0 <= v < g.vertex_count or q.label_list[u] != g.label_list[v]:
            return False
    return all(g.has_edge(mapping[a], mapping[b]) for a, b in q.edges())


def compute_local_candidates(
    u: int,
    mapping: dict[int, int],
    cands: CandidateSets,
    q: LabeledGraph,
    g: LabeledGraph,
) -> list[int]:
    """``C(u)`` restricted to data vertices adjacent to every mapped neighbour of ``u``."""
    anchors = [mapping[w] for w in q.adjacency_lists[u] if w in mapping]
    if not anchors:
        return list(cands[u])
    gsets = g.adjacency_sets
    return [v for v in cands[u] if all(v in gsets[a] for a in anchors)]


def enumerate_matches(
    q: LabeledGraph,
    g: LabeledGraph,
    cands: CandidateSets,
    order: Sequence[int],
    limits: Limits | None = None,
    materialize: bool = False,
    allow_disconnected: bool = False,
) -> EnumResult:
    """Depth-first extension of partial matches along ``order``.

    ``enum_calls`` counts every invocation of the recursive step, the root
    included. The search stops once ``limits.match_limit`` matches have been
    found (``terminated_by == "match_limit"``) or the time budget runs out.
    Disconnected orders are rejected unless ``allow_disconnected`` is set,
    in which case a vertex without mapped neighbours takes all of ``C(u)``.
    """
    limits = limits or Limits()
    order = list(order)
    ok = is_valid_order(q, order) if allow_disconnected else is_connected_order(q, order)
    if not ok:
        raise ValueError(f"invalid matching order {order}")
    n = len(order)
    pos = {u: i for i, u in enumerate(order)}
    q_adj = q.adjacency_lists
    # backward neighbours as depth indices
    back = [sorted(pos[w] for w in q_adj[u] if pos[w] < i) for i, u in enumerate(order)]
    cand_lists = [cands[u] for u in order]
    cand_sets = [frozenset(c) for c in cand_lists]
    g_lists = g.adjacency_lists
    g_sets = g.adjacency_sets

    match_limit = limits.match_limit
    time_limit = limits.time_limit
    used = bytearray(g.vertex_count)
    image = [-1] * n
    found: list[dict[int, int]] | None = [] if materialize else None
    calls = 0
    count = 0
    terminated = EXHAUSTED
    start = time.perf_counter()
    deadline = None if time_limit is None else start + time_limit

    def local(i: int) -> Sequence[int]:
        b = back[i]
        if not b:
            return cand_lists[i]
        anchor = image[b[0]]
        cset = cand_sets[i]
        if len(b) == 1:
            return [v for v in g_lists[anchor] if v in cset]
        rest = [g_sets[image[j]] for j in b[1:]]
        return [v for v in g_lists[anchor] if v in cset and all(v in s for s in rest)]

    def recurse(i: int) -> None:
        nonlocal calls, count, terminated
        calls += 1
        if deadline is not None and not (calls & _TIME_MASK):
            if time.perf_counter() > deadline:
                terminated = TIME_LIMIT
                raise _Stop
        if i == n:
            count += 1
            if found is not None:
                found.append({order[j]: image[j] for j in range(n)})
            if match_limit is not None and count >= match_limit:
                terminated = MATCH_LIMIT
                raise _Stop
            return
        for v in local(i):
            if used[v]:
                continue
            used[v] = 1
            image[i] = v
            recurse(i + 1)
            used[v] = 0
        image[i] = -1

    if match_limit is not None and match_limit <= 0:
        terminated = MATCH_LIMIT
    elif n:
        limit = sys.getrecursionlimit()
        if limit < n + 100:
            sys.setrecursionlimit(n + 100)
        try:
            recurse(0)
        except _Stop:
            pass
    return EnumResult(
        match_count=count,
        enum_calls=calls,
        elapsed=time.perf_counter() - start,
        terminated_by=terminated,
        matches=found,
    )
