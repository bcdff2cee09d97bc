"""Policy-gradient training of the ordering policy.

An episode builds a matching order one vertex at a time. Each step's
reward combines the enumeration saving of the finished order against the
RI order (shared by every step), a validity bonus and the entropy of the
step's action distribution. Steps are weighted by ``gamma**t`` into one
return per query, and the policy is updated by ascending the clipped
surrogate objective against the previous epoch's sampling policy.
"""

from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .enumeration import Limits, TIME_LIMIT, enumerate_matches
from .features import FeatureScales, static_features, step_features
from .filtering import CandidateSets, filter_candidates
from .graph import GraphStats, LabeledGraph, compute_stats, is_connected
from .ordering import MatchingOrder, order_ri
from .policy import PolicyModel, action_mask, forward, backward, init_weights, normalized_adjacency

__all__ = [
    "TrainConfig",
    "Step",
    "EpisodeTrace",
    "EpochMetrics",
    "TrainResult",
    "TrainingError",
    "QueryContext",
    "signed_log1p",
    "rollout",
    "greedy_order",
    "compute_rewards",
    "surrogate_objective",
    "ppo_update",
    "AdamState",
    "train",
    "write_metrics_csv",
    "METRICS_HEADER",
]

log = logging.getLogger(__name__)

METRICS_HEADER = ["epoch", "mean_reward", "mean_enum_ratio", "loss", "skipped_queries"]


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    epochs: int = 100
    gamma: float = 0.9
    beta_val: float = 1.0
    beta_h: float = 0.1
    clip_eps: float = 0.2
    valid_reward: float = 0.1
    invalid_penalty: float = -0.2
    match_limit: int | None = 100_000
    time_limit: float | None = 500.0
    seed: int = 0
    batch_size: int | None = None
    # "per_query": each step uses its own query's return; "sum": every step
    # uses the summed return of the whole batch.
    batch_reward: str = "per_query"
    first_by_degree: bool = False
    optimizer: str = "adam"
    refine_rounds: int = 3
    scales: FeatureScales = FeatureScales()

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must lie in (0, 1)")
        if not 0.0 < self.clip_eps < 1.0:
            raise ValueError("clip_eps must lie in (0, 1)")
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        if self.batch_reward not in ("per_query", "sum"):
            raise ValueError("batch_reward must be 'per_query' or 'sum'")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError("optimizer must be 'adam' or 'sgd'")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError("batch_size must be positive")

    @property
    def limits(self) -> Limits:
        return Limits(self.match_limit, self.time_limit)


@dataclass
class Step:
    t: int
    prefix: tuple[int, ...]
    action_space: tuple[int, ...]
    action: int
    # None when the action space was a singleton and no forward pass ran
    prob: float | None = None
    dropout_masks: list[np.ndarray] | None = field(default=None, repr=False)
    raw_argmax: int | None = None
    entropy: float = 0.0
    r_val: float = 0.0
    reward: float = 0.0

    @property
    def log_prob(self) -> float:
        return 0.0 if self.prob is None else math.log(self.prob)

    @property
    def sampled(self) -> bool:
        return self.prob is not None


@dataclass
class QueryContext:
    """Per-query data reused across epochs."""

    q: LabeledGraph
    static: np.ndarray
    adj: np.ndarray
    cands: CandidateSets | None = None
    baseline_order: MatchingOrder | None = None
    baseline_calls: int | None = None
    baseline_timed_out: bool = False

    @classmethod
    def build(cls, q: LabeledGraph, stats: GraphStats, scales: FeatureScales = FeatureScales()):
        return cls(q, static_features(q, stats, scales), normalized_adjacency(q))


@dataclass
class EpisodeTrace:
    steps: list[Step]
    order: tuple[int, ...]
    enum_calls: int | None = None
    baseline_calls: int | None = None
    r_enum: float = 0.0
    ret: float = 0.0
    query_index: int = 0
    context: QueryContext | None = field(default=None, repr=False)

    @property
    def step_rewards(self) -> list[float]:
        return [s.reward for s in self.steps]


def signed_log1p(x: float) -> float:
    return math.copysign(math.log1p(abs(x)), x) if x else 0.0


def _action_space(ctx: QueryContext, placed: set[int], t: int, first_by_degree: bool) -> list[int]:
    n = ctx.q.vertex_count
    if t == 1:
        if first_by_degree:
            degs = ctx.q.degrees
            return np.flatnonzero(degs == degs.max()).tolist()
        return list(range(n))
    adj = ctx.q.adjacency_lists
    return sorted({w for u in placed for w in adj[u] if w not in placed})


def rollout(
    model: PolicyModel,
    ctx: QueryContext,
    mode: str = "sample",
    rng: np.random.Generator | None = None,
    first_by_degree: bool = False,
) -> EpisodeTrace:
    """Generate one order. ``sample`` draws actions, ``greedy`` takes the argmax."""
    if mode not in ("sample", "greedy"):
        raise ValueError(f"unknown rollout mode {mode!r}")
    if mode == "sample" and rng is None:
        raise ValueError("sample mode needs an rng")
    n = ctx.q.vertex_count
    order: list[int] = []
    placed: set[int] = set()
    steps: list[Step] = []
    for t in range(1, n + 1):
        space = _action_space(ctx, placed, t, first_by_degree)
        if not space:
            raise ValueError("query graph is disconnected")
        step = Step(t, tuple(order), tuple(space), space[0])
        if len(space) > 1:
            h = step_features(ctx.static, order, t)
            dist, cache = forward(
                model, ctx.adj, h, action_mask(n, space), training=(mode == "sample"), rng=rng
            )
            if mode == "sample":
                p = dist.probs[space]
                step.action = space[int(rng.choice(len(space), p=p / p.sum()))]
            else:
                step.action = dist.greedy()
            step.prob = float(dist.probs[step.action])
            step.dropout_masks = cache.dropout_masks
            step.raw_argmax = dist.raw_argmax
            step.entropy = dist.entropy
        steps.append(step)
        order.append(step.action)
        placed.add(step.action)
    return EpisodeTrace(steps, tuple(order), context=ctx)


def greedy_order(
    model: PolicyModel,
    q: LabeledGraph,
    stats: GraphStats,
    scales: FeatureScales = FeatureScales(),
    first_by_degree: bool = False,
) -> MatchingOrder:
    if not is_connected(q):
        raise ValueError("query graph is disconnected")
    trace = rollout(model, QueryContext.build(q, stats, scales), "greedy", first_by_degree=first_by_degree)
    return MatchingOrder(trace.order, "rl")


def compute_rewards(
    trace: EpisodeTrace, enum_calls_learned: int, enum_calls_baseline: int, cfg: TrainConfig
) -> EpisodeTrace:
    """Fill in step rewards and the decayed return (in place; also returned).

    ``r_enum = signed_log1p(baseline - learned)`` so cheaper-than-RI orders
    earn positive reward. Singleton steps carry no validity or entropy term.
    """
    trace.enum_calls = enum_calls_learned
    trace.baseline_calls = enum_calls_baseline
    trace.r_enum = signed_log1p(enum_calls_baseline - enum_calls_learned)
    total = 0.0
    for step in trace.steps:
        if step.sampled:
            ok = step.raw_argmax in step.action_space
            step.r_val = cfg.valid_reward if ok else cfg.invalid_penalty
        else:
            step.r_val = 0.0
        step.reward = trace.r_enum + cfg.beta_val * step.r_val + cfg.beta_h * step.entropy
        total += cfg.gamma**step.t * step.reward
    trace.ret = total
    return trace


def _step_rewards_for(traces: Sequence[EpisodeTrace], cfg: TrainConfig) -> list[float]:
    if cfg.batch_reward == "sum":
        s = sum(tr.ret for tr in traces)
        return [s] * len(traces)
    return [tr.ret for tr in traces]


def surrogate_objective(
    model: PolicyModel, traces: Sequence[EpisodeTrace], cfg: TrainConfig, with_grad: bool = True
) -> tuple[float, dict[str, np.ndarray] | None]:
    """Clipped surrogate ``J`` summed over every sampled step of every trace.

    Probabilities under ``model`` are recomputed with the dropout masks that
    were drawn when the trace was sampled, so ``model == sampler`` gives a
    ratio of exactly one.
    """
    rewards = _step_rewards_for(traces, cfg)
    lo, hi = 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps
    J = 0.0
    grads = {k: np.zeros_like(v) for k, v in model.params.items()} if with_grad else None
    for tr, r in zip(traces, rewards):
        ctx = tr.context
        n = ctx.q.vertex_count
        for step in tr.steps:
            if not step.sampled:
                continue
            h = step_features(ctx.static, step.prefix, step.t)
            dist, cache = forward(
                model, ctx.adj, h, action_mask(n, step.action_space),
                training=True, dropout_masks=step.dropout_masks,
            )
            ratio = dist.probs[step.action] / step.prob
            clipped = min(max(ratio, lo), hi)
            plain, bounded = ratio * r, clipped * r
            J += min(plain, bounded)
            if with_grad and plain <= bounded and r != 0.0:
                up = np.zeros(n)
                up[step.action] = r / step.prob
                for k, g in backward(model, cache, up).items():
                    grads[k] += g
    return J, grads


@dataclass
class AdamState:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    def direction(self, grads: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
        self.t += 1
        out = {}
        for k, g in grads.items():
            m = self.m.get(k, np.zeros_like(g)) * self.beta1 + (1 - self.beta1) * g
            v = self.v.get(k, np.zeros_like(g)) * self.beta2 + (1 - self.beta2) * g * g
            self.m[k], self.v[k] = m, v
            m_hat = m / (1 - self.beta1**self.t)
            v_hat = v / (1 - self.beta2**self.t)
            out[k] = m_hat / (np.sqrt(v_hat) + self.eps)
        return out


def ppo_update(
    model: PolicyModel,
    sampler: PolicyModel,
    traces: Sequence[EpisodeTrace],
    cfg: TrainConfig,
    adam: AdamState | None = None,
) -> tuple[PolicyModel, float]:
    """One gradient-ascent step on the surrogate objective.

    ``sampler`` is the frozen policy that generated ``traces``; its action
    probabilities are read from the traces. Returns a new model and ``J``.
    """
    del sampler  # probabilities under the sampler are stored in the traces
    J, grads = surrogate_objective(model, traces, cfg)
    if not math.isfinite(J) or not all(np.isfinite(g).all() for g in grads.values()):
        bad = [k for k, g in grads.items() if not np.isfinite(g).all()]
        raise TrainingError(f"non-finite objective {J} or gradients in {bad}")
    if cfg.optimizer == "adam":
        if adam is None:
            adam = AdamState()
        step = adam.direction(grads)
    else:
        step = grads
    new = model.copy()
    for k in new.params:
        new.params[k] = new.params[k] + cfg.lr * step[k]
    if not new.all_finite():
        raise TrainingError("update produced non-finite weights")
    return new, J


@dataclass
class EpochMetrics:
    epoch: int
    mean_reward: float
    mean_enum_ratio: float
    loss: float
    skipped_queries: int
    seconds: float = 0.0

    def row(self) -> list[str]:
        return [
            str(self.epoch),
            f"{self.mean_reward:.6f}",
            f"{self.mean_enum_ratio:.6f}",
            f"{self.loss:.6f}",
            str(self.skipped_queries),
        ]


@dataclass
class TrainResult:
    model: PolicyModel
    metrics: list[EpochMetrics]


class _Evaluator:
    """Enumeration counts for (query, order), memoized."""

    def __init__(self, g: LabeledGraph, limits: Limits):
        self.g = g
        self.limits = limits
        self.memo: dict[tuple[int, tuple[int, ...]], tuple[int, bool]] = {}

    def __call__(self, qi: int, ctx: QueryContext, order: Sequence[int]) -> tuple[int, bool]:
        key = (qi, tuple(order))
        hit = self.memo.get(key)
        if hit is None:
            res = enumerate_matches(ctx.q, self.g, ctx.cands, order, self.limits)
            hit = (res.enum_calls, res.terminated_by == TIME_LIMIT)
            self.memo[key] = hit
        return hit


def prepare_contexts(
    queries: Sequence[LabeledGraph], g: LabeledGraph, stats: GraphStats, cfg: TrainConfig
) -> list[QueryContext]:
    contexts = []
    for q in queries:
        if not is_connected(q):
            raise ValueError("training queries must be connected")
        ctx = QueryContext.build(q, stats, cfg.scales)
        ctx.cands = filter_candidates(q, g, cfg.refine_rounds)
        ctx.baseline_order = order_ri(q)
        contexts.append(ctx)
    return contexts


def train(
    g: LabeledGraph,
    queries: Sequence[LabeledGraph],
    cfg: TrainConfig = TrainConfig(),
    model: PolicyModel | None = None,
    stats: GraphStats | None = None,
    layers: int = 2,
    dim: int = 64,
    dropout: float = 0.2,
) -> TrainResult:
    """Train from scratch, or continue from ``model`` (incremental mode)."""
    if not queries:
        raise ValueError("empty training query set")
    stats = stats or compute_stats(g)
    if model is None:
        model = init_weights(layers, dim, cfg.seed, dropout)
    model = model.copy()
    metrics: list[EpochMetrics] = []
    if cfg.epochs == 0:
        return TrainResult(model, metrics)

    contexts = prepare_contexts(queries, g, stats, cfg)
    evaluate = _Evaluator(g, cfg.limits)
    for qi, ctx in enumerate(contexts):
        ctx.baseline_calls, ctx.baseline_timed_out = evaluate(qi, ctx, ctx.baseline_order)

    adam = AdamState() if cfg.optimizer == "adam" else None
    batch = cfg.batch_size or len(contexts)
    for epoch in range(1, cfg.epochs + 1):
        started = time.perf_counter()
        sampler = model.copy()
        traces: list[EpisodeTrace] = []
        skipped = 0
        ratios = []
        for qi, ctx in enumerate(contexts):
            rng = np.random.default_rng([cfg.seed, epoch, qi])
            tr = rollout(sampler, ctx, "sample", rng, cfg.first_by_degree)
            tr.query_index = qi
            calls, timed_out = evaluate(qi, ctx, tr.order)
            if timed_out or ctx.baseline_timed_out:
                skipped += 1
                continue
            compute_rewards(tr, calls, ctx.baseline_calls, cfg)
            ratios.append(calls / max(ctx.baseline_calls, 1))
            traces.append(tr)

        loss = 0.0
        if not traces:
            log.warning("epoch %d: every query was skipped", epoch)
        else:
            for start in range(0, len(traces), batch):
                try:
                    model, J = ppo_update(model, sampler, traces[start : start + batch], cfg, adam)
                except TrainingError as exc:
                    log.error("epoch %d aborted: %s", epoch, exc)
                    J = float("nan")
                    break
                loss += J
        m = EpochMetrics(
            epoch,
            float(np.mean([tr.ret for tr in traces])) if traces else 0.0,
            float(np.mean(ratios)) if ratios else 0.0,
            loss,
            skipped,
            time.perf_counter() - started,
        )
        metrics.append(m)
        log.info(
            "epoch %d reward=%.4f enum_ratio=%.4f J=%.4f skipped=%d",
            epoch, m.mean_reward, m.mean_enum_ratio, m.loss, skipped,
        )
    return TrainResult(model, metrics)


def write_metrics_csv(metrics: Sequence[EpochMetrics], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRICS_HEADER)
        for m in metrics:
            w.writerow(m.row())
