"""Backtracking subgraph matching with pluggable and learned matching orders."""

from .enumeration import EnumResult, Limits, enumerate_matches
from .filtering import CandidateSets, filter_candidates, global_refine, local_prune
from .graph import (
    GraphStats,
    LabeledGraph,
    compute_stats,
    extract_connected_query,
    load_graph,
    save_graph,
)
from .ordering import (
    MatchingOrder,
    order_gql,
    order_infrequent_label,
    order_qsi,
    order_ri,
)
from .policy import PolicyModel, init_weights, load_model, save_model
from .training import TrainConfig, greedy_order, train

__version__ = "0.1.0"

__all__ = [
    "CandidateSets",
    "EnumResult",
    "GraphStats",
    "LabeledGraph",
    "Limits",
    "MatchingOrder",
    "PolicyModel",
    "TrainConfig",
    "compute_stats",
    "enumerate_matches",
    "extract_connected_query",
    "filter_candidates",
    "global_refine",
    "greedy_order",
    "init_weights",
    "load_graph",
    "load_model",
    "local_prune",
    "order_gql",
    "order_infrequent_label",
    "order_qsi",
    "order_ri",
    "save_graph",
    "save_model",
    "train",
]
