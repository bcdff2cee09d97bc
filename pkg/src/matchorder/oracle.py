"""Brute-force match oracle and exhaustive matching-order spectrum."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator

from .enumeration import Limits, enumerate_matches
from .filtering import CandidateSets
from .graph import LabeledGraph

__all__ = [
    "SpectrumReport",
    "SizeGuardError",
    "oracle_match",
    "connected_orders",
    "spectrum",
    "ORACLE_MAX_QUERY",
    "ORACLE_MAX_DATA",
]

ORACLE_MAX_QUERY = 10
ORACLE_MAX_DATA = 64
MAX_PERMUTATION_QUERY = 8
MAX_CONNECTED_QUERY = 10


class SizeGuardError(ValueError):
    """Instance too large for an exhaustive routine."""


def oracle_match(q: LabeledGraph, g: LabeledGraph) -> set[tuple[int, ...]]:
    """Every injective label- and edge-preserving map, as image tuples.

    Entry ``i`` of each tuple is the data vertex assigned to query vertex
    ``i``. Plain backtracking that tries every data vertex for each query
    vertex, checking labels, injectivity and edges against earlier choices.
    """
    if q.vertex_count > ORACLE_MAX_QUERY or g.vertex_count > ORACLE_MAX_DATA:
        raise SizeGuardError(
            f"oracle limited to |V(q)| <= {ORACLE_MAX_QUERY}, |V(G)| <= {ORACLE_MAX_DATA}"
        )
    n = q.vertex_count
    qlab, glab = q.label_list, g.label_list
    q_adj = q.adjacency_lists
    # breadth-first visiting order so adjacency checks bite early
    visit: list[int] = []
    for root in range(n):
        if root in visit:
            continue
        visit.append(root)
        i = len(visit) - 1
        while i < len(visit):
            for w in q_adj[visit[i]]:
                if w not in visit:
                    visit.append(w)
            i += 1
    rank = {u: i for i, u in enumerate(visit)}
    earlier = [[w for w in q_adj[u] if rank[w] < rank[u]] for u in visit]
    out: set[tuple[int, ...]] = set()
    image = [-1] * n
    used: set[int] = set()

    def extend(i: int) -> None:
        if i == n:
            out.add(tuple(image))
            return
        u = visit[i]
        for v in range(g.vertex_count):
            if glab[v] != qlab[u] or v in used:
                continue
            if not all(g.has_edge(image[w], v) for w in earlier[i]):
                continue
            image[u] = v
            used.add(v)
            extend(i + 1)
            used.discard(v)
            image[u] = -1

    if n:
        extend(0)
    return out


def connected_orders(q: LabeledGraph) -> Iterator[tuple[int, ...]]:
    """All connected permutations of ``q``'s vertices, in lexicographic order."""
    n = q.vertex_count
    adj = q.adjacency_sets

    def grow(prefix: list[int], placed: set[int]) -> Iterator[tuple[int, ...]]:
        if len(prefix) == n:
            yield tuple(prefix)
            return
        for u in range(n):
            if u in placed or (prefix and not adj[u] & placed):
                continue
            prefix.append(u)
            placed.add(u)
            yield from grow(prefix, placed)
            placed.discard(u)
            prefix.pop()

    yield from grow([], set())


@dataclass
class SpectrumReport:
    orders: list[tuple[int, ...]]
    enum_calls: list[int]
    match_counts: list[int]

    @property
    def orders_evaluated(self) -> int:
        return len(self.orders)

    @property
    def min_enum_calls(self) -> int:
        return min(self.enum_calls)

    @property
    def optimal_orders(self) -> list[tuple[int, ...]]:
        best = self.min_enum_calls
        return sorted(o for o, c in zip(self.orders, self.enum_calls) if c == best)

    @property
    def optimal_order(self) -> tuple[int, ...]:
        """Lexicographically smallest order attaining the minimum."""
        return self.optimal_orders[0]

    def enum_calls_of(self, order) -> int:
        return self.enum_calls[self.orders.index(tuple(order))]


def spectrum(
    q: LabeledGraph,
    g: LabeledGraph,
    cands: CandidateSets,
    order_source: str = "all_connected",
) -> SpectrumReport:
    """Run unlimited enumeration for every order in the chosen family."""
    n = q.vertex_count
    if order_source == "all_permutations":
        if n > MAX_PERMUTATION_QUERY:
            raise SizeGuardError(f"all_permutations limited to |V(q)| <= {MAX_PERMUTATION_QUERY}")
        family = itertools.permutations(range(n))
    elif order_source == "all_connected":
        if n > MAX_CONNECTED_QUERY:
            raise SizeGuardError(f"all_connected limited to |V(q)| <= {MAX_CONNECTED_QUERY}")
        family = connected_orders(q)
    else:
        raise ValueError(f"unknown order source {order_source!r}")
    orders, calls, counts = [], [], []
    for order in family:
        res = enumerate_matches(
            q, g, cands, order, Limits.unlimited(), allow_disconnected=True
        )
        orders.append(tuple(order))
        calls.append(res.enum_calls)
        counts.append(res.match_count)
    return SpectrumReport(orders, calls, counts)
