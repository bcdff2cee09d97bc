"""Deterministic heuristic matching orders.

Every generator returns a connected permutation of the query vertices:
each vertex after the first has a neighbour earlier in the order. Where
the underlying heuristic would pick arbitrarily, the lowest vertex id wins.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

from .filtering import CandidateSets
from .graph import GraphStats, LabeledGraph, is_connected

__all__ = [
    "MatchingOrder",
    "DisconnectedQueryError",
    "is_valid_order",
    "is_connected_order",
    "order_ri",
    "order_qsi",
    "order_gql",
    "order_infrequent_label",
    "backward_neighbors",
    "forward_neighbors",
    "STRATEGIES",
]

STRATEGIES = ("ri", "qsi", "gql", "label", "rl")


class DisconnectedQueryError(ValueError):
    """The query graph is disconnected, so no connected order exists."""


@dataclass(frozen=True)
class MatchingOrder:
    vertices: tuple[int, ...]
    strategy: str = ""

    def __iter__(self):
        return iter(self.vertices)

    def __len__(self) -> int:
        return len(self.vertices)

    def __getitem__(self, i):
        return self.vertices[i]

    def __str__(self) -> str:
        return " ".join(map(str, self.vertices))


def is_valid_order(q: LabeledGraph, order: Sequence[int]) -> bool:
    return sorted(order) == list(range(q.vertex_count))


def is_connected_order(q: LabeledGraph, order: Sequence[int]) -> bool:
    if not is_valid_order(q, order):
        return False
    placed: set[int] = set()
    adj = q.adjacency_sets
    for i, u in enumerate(order):
        if i and not (adj[u] & placed):
            return False
        placed.add(u)
    return True


def backward_neighbors(q: LabeledGraph, order: Sequence[int], u: int) -> list[int]:
    """Neighbours of ``u`` placed before it in ``order``."""
    pos = {w: i for i, w in enumerate(order)}
    return [w for w in q.adjacency_lists[u] if pos[w] < pos[u]]


def forward_neighbors(q: LabeledGraph, order: Sequence[int], u: int) -> list[int]:
    pos = {w: i for i, w in enumerate(order)}
    return [w for w in q.adjacency_lists[u] if pos[w] > pos[u]]


def _require_connected(q: LabeledGraph) -> None:
    if q.vertex_count == 0:
        raise ValueError("empty query graph")
    if not is_connected(q):
        raise DisconnectedQueryError("query graph must be connected")


def _greedy_connected(
    q: LabeledGraph, first: int, key: Callable[[int, list[int], set[int]], tuple]
) -> list[int]:
    """Grow from ``first``, each step taking the frontier vertex with minimal key."""
    order = [first]
    placed = {first}
    adj = q.adjacency_lists
    frontier = set(adj[first])
    while len(order) < q.vertex_count:
        u = min(frontier, key=lambda w: key(w, order, placed))
        order.append(u)
        placed.add(u)
        frontier.discard(u)
        frontier.update(w for w in adj[u] if w not in placed)
    return order


def order_ri(q: LabeledGraph) -> MatchingOrder:
    """RI ordering: max degree first, then most already-ordered neighbours.

    Ties are broken by |u_neig| (ordered vertices adjacent to ``u`` through
    a common unordered neighbour), then |u_unv| (neighbours of ``u`` not
    adjacent to anything ordered), then lowest id.
    """
    _require_connected(q)
    adj = q.adjacency_sets
    n = q.vertex_count
    degs = q.degrees.tolist()
    first = min(range(n), key=lambda u: (-degs[u], u))
    order = [first]
    placed = {first}
    while len(order) < n:
        best_key = None
        best = -1
        for u in range(n):
            if u in placed:
                continue
            back = len(adj[u] & placed)
            # vertices in the order sharing an unordered neighbour with u
            outside_u = adj[u] - placed
            neig = sum(1 for up in placed if adj[up] & outside_u)
            unv = sum(1 for up in outside_u if not (adj[up] & placed))
            k = (back, neig, unv, -u)
            if best_key is None or k > best_key:
                best_key, best = k, u
        order.append(best)
        placed.add(best)
    return MatchingOrder(tuple(order), "ri")


def order_qsi(q: LabeledGraph, stats: GraphStats) -> MatchingOrder:
    """Infrequent-edge-first order (QuickSI style).

    Query edges are weighted by how many data edges join the same label
    pair. The order starts at the lightest edge (lower-degree endpoint
    first) and grows through the lightest edge leaving the ordered set.
    """
    _require_connected(q)
    n = q.vertex_count
    if n == 1:
        return MatchingOrder((0,), "qsi")
    labs = q.label_list
    degs = q.degrees.tolist()
    weight = {
        (a, b): stats.edge_pair_count(labs[a], labs[b]) for a, b in q.edges()
    }

    def w(a: int, b: int) -> int:
        return weight[(a, b) if a < b else (b, a)]

    (a, b) = min(weight, key=lambda e: (weight[e], e))
    first, second = sorted((a, b), key=lambda x: (degs[x], x))
    order = [first, second]
    placed = {first, second}
    adj = q.adjacency_lists
    while len(order) < n:
        best_key = None
        best = -1
        for u in range(n):
            if u in placed:
                continue
            ws = [w(u, p) for p in adj[u] if p in placed]
            if not ws:
                continue
            k = (min(ws), sum(ws), u)
            if best_key is None or k < best_key:
                best_key, best = k, u
        order.append(best)
        placed.add(best)
    return MatchingOrder(tuple(order), "qsi")


def order_gql(q: LabeledGraph, cands: CandidateSets) -> MatchingOrder:
    """Smallest candidate set first, then smallest adjacent candidate set."""
    _require_connected(q)
    sizes = cands.sizes
    first = min(range(q.vertex_count), key=lambda u: (sizes[u], u))
    order = _greedy_connected(q, first, lambda u, _o, _p: (sizes[u], u))
    return MatchingOrder(tuple(order), "gql")


def order_infrequent_label(q: LabeledGraph, stats: GraphStats) -> MatchingOrder:
    """Rarest data-graph label first (ties: higher degree, then id)."""
    _require_connected(q)
    labs = q.label_list
    degs = q.degrees.tolist()

    def key(u: int, _o=None, _p=None) -> tuple:
        return (stats.label_count(labs[u]), -degs[u], u)

    first = min(range(q.vertex_count), key=key)
    return MatchingOrder(tuple(_greedy_connected(q, first, key)), "label")
