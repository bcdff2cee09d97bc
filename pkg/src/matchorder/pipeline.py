"""Filter, order and enumerate one query: the generic matching pipeline."""

from __future__ import annotations

import time
from dataclasses import dataclass

from .enumeration import TIME_LIMIT, Limits, enumerate_matches
from .filtering import DEFAULT_REFINE_ROUNDS, CandidateSets, filter_candidates
from .graph import GraphStats, LabeledGraph
from .ordering import (
    MatchingOrder,
    order_gql,
    order_infrequent_label,
    order_qsi,
    order_ri,
)
from .policy import PolicyModel
from .training import greedy_order

__all__ = ["QueryReport", "REPORT_HEADER", "build_order", "run_query"]

REPORT_HEADER = [
    "query_id",
    "strategy",
    "order",
    "t_filter",
    "t_order",
    "t_enum",
    "enum_calls",
    "match_count",
    "solved",
    "terminated_by",
]


def build_order(
    strategy: str,
    q: LabeledGraph,
    stats: GraphStats,
    cands: CandidateSets,
    model: PolicyModel | None = None,
) -> MatchingOrder:
    if strategy == "ri":
        return order_ri(q)
    if strategy == "qsi":
        return order_qsi(q, stats)
    if strategy == "gql":
        return order_gql(q, cands)
    if strategy == "label":
        return order_infrequent_label(q, stats)
    if strategy == "rl":
        if model is None:
            raise ValueError("the rl strategy needs a policy model")
        return greedy_order(model, q, stats)
    raise ValueError(f"unknown ordering strategy {strategy!r}")


@dataclass
class QueryReport:
    query_id: str
    strategy: str
    order: MatchingOrder
    t_filter: float
    t_order: float
    t_enum: float
    enum_calls: int
    match_count: int
    terminated_by: str
    time_limit: float | None = None

    @property
    def solved(self) -> bool:
        return self.terminated_by != TIME_LIMIT

    @property
    def total_time(self) -> float:
        return self.t_filter + self.t_order + self.t_enum

    def row(self) -> list[str]:
        t_filter, t_order, t_enum = self.t_filter, self.t_order, self.t_enum
        if not self.solved and self.time_limit is not None:
            # unsolved queries are charged the full time limit
            t_filter, t_order, t_enum = 0.0, 0.0, self.time_limit
        return [
            self.query_id,
            self.strategy,
            str(self.order),
            f"{t_filter:.6f}",
            f"{t_order:.6f}",
            f"{t_enum:.6f}",
            str(self.enum_calls),
            str(self.match_count),
            str(self.solved).lower(),
            self.terminated_by,
        ]


def run_query(
    query_id: str,
    q: LabeledGraph,
    g: LabeledGraph,
    stats: GraphStats,
    strategy: str,
    limits: Limits = Limits(),
    refine_rounds: int = DEFAULT_REFINE_ROUNDS,
    model: PolicyModel | None = None,
    materialize: bool = False,
) -> tuple[QueryReport, list[dict[int, int]] | None]:
    t0 = time.perf_counter()
    cands = filter_candidates(q, g, refine_rounds)
    t1 = time.perf_counter()
    order = build_order(strategy, q, stats, cands, model)
    t2 = time.perf_counter()
    res = enumerate_matches(q, g, cands, order, limits, materialize=materialize)
    report = QueryReport(
        query_id,
        strategy,
        order,
        t1 - t0,
        t2 - t1,
        res.elapsed,
        res.enum_calls,
        res.match_count,
        res.terminated_by,
        limits.time_limit,
    )
    return report, res.matches
