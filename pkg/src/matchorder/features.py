"""Per-step query vertex features for the ordering policy.

Column layout (one row per query vertex ``u``, step ``t`` in ``1..|V(q)|``):

0. degree(u) / alpha_degree
1. dense label id of u
2. vertex id of u
3. |{v in G : d(v) > d(u)}| / (|V(G)| * alpha_d)
4. |{v in G : L(v) = L(u)}| / (|V(G)| * alpha_l)
5. |V(q)| - t + 1
6. 1 if u is already ordered, else 0

Only the last two columns change during an episode.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .graph import GraphStats, LabeledGraph

__all__ = ["FeatureScales", "FEATURE_DIM", "static_features", "encode", "step_features"]

FEATURE_DIM = 7


@dataclass(frozen=True)
class FeatureScales:
    degree: float = 1.0
    degree_rank: float = 1.0
    label: float = 1.0


def static_features(
    q: LabeledGraph, stats: GraphStats, scales: FeatureScales = FeatureScales()
) -> np.ndarray:
    """The first five columns, constant across an episode."""
    n = q.vertex_count
    nv = max(stats.vertex_count, 1)
    degs = q.degrees
    out = np.empty((n, 5), dtype=np.float64)
    out[:, 0] = degs / scales.degree
    out[:, 1] = q.labels
    out[:, 2] = np.arange(n)
    out[:, 3] = [stats.degree_exceed_count(int(d)) for d in degs]
    out[:, 3] /= nv * scales.degree_rank
    out[:, 4] = [stats.label_count(int(lab)) for lab in q.labels]
    out[:, 4] /= nv * scales.label
    return out


def step_features(static: np.ndarray, prefix: Sequence[int], t: int) -> np.ndarray:
    n = static.shape[0]
    if not 1 <= t <= n or len(prefix) != t - 1:
        raise ValueError(f"step {t} needs an ordered prefix of length {t - 1}, got {len(prefix)}")
    h = np.empty((n, FEATURE_DIM), dtype=np.float64)
    h[:, :5] = static
    h[:, 5] = n - t + 1
    h[:, 6] = 0.0
    if prefix:
        h[list(prefix), 6] = 1.0
    return h


def encode(
    q: LabeledGraph,
    stats: GraphStats,
    prefix: Sequence[int],
    t: int,
    scales: FeatureScales = FeatureScales(),
) -> np.ndarray:
    """Feature matrix H^t for the state after ``prefix`` has been ordered."""
    return step_features(static_features(q, stats, scales), prefix, t)
