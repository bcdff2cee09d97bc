"""GraphQL-style candidate filtering.

Local pruning keeps a data vertex ``v`` for query vertex ``u`` when the
labels agree and the neighbourhood profile of ``u`` is a sub-multiset of
that of ``v``. Global refinement then repeatedly drops ``v`` from ``C(u)``
unless the bipartite graph between ``N(u)`` and ``N(v)`` (edge ``(u', v')``
iff ``v'`` is a candidate of ``u'``) has a matching saturating ``N(u)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .graph import LabeledGraph

__all__ = [
    "CandidateSets",
    "profile",
    "is_sub_multiset",
    "local_prune",
    "global_refine",
    "filter_candidates",
    "max_bipartite_matching",
    "DEFAULT_REFINE_ROUNDS",
]

DEFAULT_REFINE_ROUNDS = 3


@dataclass(frozen=True)
class CandidateSets:
    """Sorted candidate tuple ``C(u)`` per query vertex."""

    sets: tuple[tuple[int, ...], ...]

    def __getitem__(self, u: int) -> tuple[int, ...]:
        return self.sets[u]

    def __len__(self) -> int:
        return len(self.sets)

    def __iter__(self):
        return iter(self.sets)

    @property
    def sizes(self) -> list[int]:
        return [len(c) for c in self.sets]

    def any_empty(self) -> bool:
        return any(not c for c in self.sets)

    @classmethod
    def from_iterables(cls, sets: Iterable[Iterable[int]]) -> "CandidateSets":
        return cls(tuple(tuple(sorted(set(int(v) for v in c))) for c in sets))


def profile(g: LabeledGraph, u: int) -> list[int]:
    """Sorted labels of ``u`` and its neighbours."""
    labs = g.label_list
    return sorted([labs[u]] + [labs[w] for w in g.adjacency_lists[u]])


def is_sub_multiset(small: Sequence[int], big: Sequence[int]) -> bool:
    """Multiset inclusion for two ascending sequences."""
    i = 0
    nb = len(big)
    for x in small:
        while i < nb and big[i] < x:
            i += 1
        if i == nb or big[i] != x:
            return False
        i += 1
    return True


def _neighbor_label_counts(g: LabeledGraph, width: int) -> np.ndarray:
    rows = np.repeat(np.arange(g.vertex_count), g.degrees)
    counts = np.zeros((g.vertex_count, width), dtype=np.int64)
    np.add.at(counts, (rows, g.labels[g.neighbors]), 1)
    return counts


def local_prune(q: LabeledGraph, g: LabeledGraph) -> CandidateSets:
    """Label plus profile-inclusion filter.

    ``q`` and ``g`` must share one dense label space (see
    :func:`matchorder.graph.align_labels`).
    """
    width = max(q.label_universe_size, g.label_universe_size)
    q_counts = _neighbor_label_counts(q, width)
    g_counts = _neighbor_label_counts(g, width)
    by_label: dict[int, np.ndarray] = {}
    out = []
    for u in range(q.vertex_count):
        lab = q.label_list[u]
        if lab not in by_label:
            by_label[lab] = np.flatnonzero(g.labels == lab)
        pool = by_label[lab]
        # with equal labels, profile inclusion reduces to neighbour-label counts
        ok = np.all(g_counts[pool] >= q_counts[u], axis=1)
        out.append(tuple(pool[ok].tolist()))
    return CandidateSets(tuple(out))


def max_bipartite_matching(
    left_size: int, right_size: int, edges: Iterable[tuple[int, int]]
) -> int:
    """Maximum-cardinality bipartite matching size via augmenting paths."""
    adj: list[list[int]] = [[] for _ in range(left_size)]
    for a, b in edges:
        if not (0 <= a < left_size and 0 <= b < right_size):
            raise ValueError(f"edge ({a}, {b}) out of range")
        adj[a].append(b)
    match_right = [-1] * right_size

    def augment(a: int, seen: list[bool]) -> bool:
        for b in adj[a]:
            if seen[b]:
                continue
            seen[b] = True
            if match_right[b] == -1 or augment(match_right[b], seen):
                match_right[b] = a
                return True
        return False

    size = 0
    for a in range(left_size):
        if adj[a] and augment(a, [False] * right_size):
            size += 1
    return size


def _semi_perfect(
    q_nbrs: Sequence[int], g_nbrs: Sequence[int], cand_sets: Sequence[frozenset[int]]
) -> bool:
    if len(q_nbrs) > len(g_nbrs):
        return False
    edges = [
        (i, j)
        for i, up in enumerate(q_nbrs)
        for j, vp in enumerate(g_nbrs)
        if vp in cand_sets[up]
    ]
    return max_bipartite_matching(len(q_nbrs), len(g_nbrs), edges) == len(q_nbrs)


def global_refine(
    q: LabeledGraph,
    g: LabeledGraph,
    cands: CandidateSets,
    rounds: int = DEFAULT_REFINE_ROUNDS,
    sweep_order: Sequence[int] | None = None,
) -> CandidateSets:
    """Synchronous refinement sweeps until fixpoint or ``rounds`` sweeps.

    Every sweep tests all pairs against the previous sweep's sets, so the
    result does not depend on ``sweep_order``; the parameter exists to let
    tests confirm that.
    """
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    order = list(range(q.vertex_count)) if sweep_order is None else list(sweep_order)
    current = [frozenset(c) for c in cands]
    q_adj = q.adjacency_lists
    g_adj = g.adjacency_lists
    for _ in range(rounds):
        nxt = list(current)
        changed = False
        for u in order:
            keep = frozenset(
                v for v in current[u] if _semi_perfect(q_adj[u], g_adj[v], current)
            )
            if len(keep) != len(current[u]):
                changed = True
            nxt[u] = keep
        current = nxt
        if not changed:
            break
    return CandidateSets.from_iterables(current)


def filter_candidates(
    q: LabeledGraph, g: LabeledGraph, rounds: int = DEFAULT_REFINE_ROUNDS
) -> CandidateSets:
    """Local pruning followed by global refinement."""
    return global_refine(q, g, local_prune(q, g), rounds)


def naive_profile_candidates(q: LabeledGraph, g: LabeledGraph) -> CandidateSets:
    """Reference local pruning straight from the profile definition."""
    g_profiles = [profile(g, v) for v in range(g.vertex_count)]
    out = []
    for u in range(q.vertex_count):
        pu = profile(q, u)
        lab = q.label_list[u]
        out.append(
            [
                v
                for v in range(g.vertex_count)
                if g.label_list[v] == lab and is_sub_multiset(pu, g_profiles[v])
            ]
        )
    return CandidateSets.from_iterables(out)
