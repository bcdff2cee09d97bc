"""Small synthetic data graphs for experiments and tests."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .graph import LabeledGraph

__all__ = ["random_labeled_graph", "skewed_label_graph"]


def random_labeled_graph(
    n: int, edge_prob: float, num_labels: int, seed: int, connected: bool = False
) -> LabeledGraph:
    """Erdos-Renyi graph with uniform labels; ``connected`` adds a random spanning path first."""
    rng = np.random.default_rng(seed)
    labels = rng.integers(num_labels, size=n)
    edges = set()
    if connected and n > 1:
        perm = rng.permutation(n)
        edges.update((min(a, b), max(a, b)) for a, b in zip(perm[:-1].tolist(), perm[1:].tolist()))
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(iu.shape[0]) < edge_prob
    edges.update(zip(iu[keep].tolist(), ju[keep].tolist()))
    return LabeledGraph.from_edges(labels.tolist(), sorted(edges), num_labels)


def skewed_label_graph(
    n: int = 200,
    m: int = 600,
    label_weights: Sequence[float] = (0.55, 0.25, 0.15, 0.05),
    seed: int = 0,
    hub_label_bias: float = 0.6,
) -> LabeledGraph:
    """Connected graph with heavy-tailed degrees and skewed label frequencies.

    Edges come from a random spanning tree plus preferential attachment, so
    a few hubs dominate the degree distribution. A fraction
    ``hub_label_bias`` of the top-degree decile carries the most frequent
    label. That makes "highest degree first" a poor start vertex while a
    rare-label start stays selective.
    """
    if m < n - 1:
        raise ValueError("need at least n - 1 edges for a connected graph")
    rng = np.random.default_rng(seed)
    edges: set[tuple[int, int]] = set()
    deg = np.zeros(n)
    perm = rng.permutation(n).tolist()
    for i in range(1, n):
        a, b = perm[i], perm[int(rng.integers(i))]
        edges.add((min(a, b), max(a, b)))
        deg[a] += 1
        deg[b] += 1
    while len(edges) < m:
        w = deg + 1.0
        a, b = rng.choice(n, size=2, replace=False, p=w / w.sum()).tolist()
        e = (min(a, b), max(a, b))
        if e not in edges:
            edges.add(e)
            deg[a] += 1
            deg[b] += 1

    weights = np.asarray(label_weights, dtype=np.float64)
    labels = rng.choice(len(weights), size=n, p=weights / weights.sum())
    frequent = int(np.argmax(weights))
    hubs = np.argsort(-deg, kind="stable")[: max(1, n // 10)]
    for v in hubs.tolist():
        if rng.random() < hub_label_bias:
            labels[v] = frequent
    return LabeledGraph.from_edges(labels.tolist(), sorted(edges), len(weights))
