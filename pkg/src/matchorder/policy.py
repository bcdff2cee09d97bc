"""GCN + two-layer scorer policy over query vertices, in plain numpy.

The forward pass is::

    H[l+1] = dropout(relu(A_hat @ H[l] @ W[l] + b[l]))      l = 0..L-1
    s      = relu(H[L] @ W1 + b1) @ W2 + b2                 one score per vertex
    p      = softmax(s restricted to the action space)       zero elsewhere

with ``A_hat = D^-1/2 (A + I) D^-1/2``. :func:`backward` gives exact
gradients of any scalar loss given its gradient with respect to ``p``.
All arithmetic is float64.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .features import FEATURE_DIM
from .graph import LabeledGraph

__all__ = [
    "PolicyModel",
    "ActionDistribution",
    "ForwardCache",
    "CheckpointError",
    "CheckpointVersionError",
    "CheckpointDimensionError",
    "normalized_adjacency",
    "init_weights",
    "forward",
    "backward",
    "action_mask",
    "dumps_model",
    "loads_model",
    "save_model",
    "load_model",
    "CHECKPOINT_MAGIC",
]

CHECKPOINT_MAGIC = "RLQVO-CKPT"
CHECKPOINT_VERSION = "v1"


class CheckpointError(ValueError):
    pass


class CheckpointVersionError(CheckpointError):
    pass


class CheckpointDimensionError(CheckpointError):
    pass


def param_shapes(layers: int, dim: int, in_dim: int = FEATURE_DIM) -> dict[str, tuple[int, int]]:
    shapes: dict[str, tuple[int, int]] = {}
    width = in_dim
    for l in range(layers):
        shapes[f"gcn{l}.weight"] = (width, dim)
        shapes[f"gcn{l}.bias"] = (1, dim)
        width = dim
    shapes["mlp1.weight"] = (width, dim)
    shapes["mlp1.bias"] = (1, dim)
    shapes["mlp2.weight"] = (dim, 1)
    shapes["mlp2.bias"] = (1, 1)
    return shapes


@dataclass
class PolicyModel:
    layers: int
    dim: int
    dropout: float
    seed: int
    params: dict[str, np.ndarray] = field(repr=False)
    in_dim: int = FEATURE_DIM
    activation: str = "relu"

    def copy(self) -> "PolicyModel":
        return PolicyModel(
            self.layers,
            self.dim,
            self.dropout,
            self.seed,
            {k: v.copy() for k, v in self.params.items()},
            self.in_dim,
            self.activation,
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PolicyModel):
            return NotImplemented
        return (
            (self.layers, self.dim, self.dropout, self.seed, self.in_dim)
            == (other.layers, other.dim, other.dropout, other.seed, other.in_dim)
            and self.params.keys() == other.params.keys()
            and all(
                self.params[k].shape == other.params[k].shape
                and self.params[k].tobytes() == other.params[k].tobytes()
                for k in self.params
            )
        )

    def all_finite(self) -> bool:
        return all(np.isfinite(v).all() for v in self.params.values())


def init_weights(
    layers: int = 2,
    dim: int = 64,
    seed: int = 0,
    dropout: float = 0.2,
    in_dim: int = FEATURE_DIM,
) -> PolicyModel:
    """Glorot-uniform weights, zero biases, deterministic under ``seed``."""
    if layers < 1 or dim < 1 or in_dim < 1:
        raise ValueError("layers, dim and in_dim must be positive")
    if not 0.0 <= dropout < 1.0:
        raise ValueError("dropout must lie in [0, 1)")
    rng = np.random.default_rng(seed)
    params = {}
    for name, (rows, cols) in param_shapes(layers, dim, in_dim).items():
        if name.endswith(".bias"):
            params[name] = np.zeros((rows, cols))
        else:
            bound = math.sqrt(6.0 / (rows + cols))
            params[name] = rng.uniform(-bound, bound, size=(rows, cols))
    return PolicyModel(layers, dim, dropout, seed, params, in_dim)


def normalized_adjacency(q: LabeledGraph) -> np.ndarray:
    a = q.dense_adjacency() + np.eye(q.vertex_count)
    d = 1.0 / np.sqrt(a.sum(axis=1))
    return a * d[:, None] * d[None, :]


def action_mask(n: int, action_space: Sequence[int]) -> np.ndarray:
    mask = np.zeros(n, dtype=bool)
    mask[list(action_space)] = True
    return mask


@dataclass
class ActionDistribution:
    probs: np.ndarray
    mask: np.ndarray
    scores: np.ndarray

    @property
    def entropy(self) -> float:
        p = self.probs[self.mask]
        p = p[p > 0]
        return float(-(p * np.log(p)).sum())

    @property
    def raw_argmax(self) -> int:
        """Highest-scoring vertex before masking (lowest id on ties)."""
        return int(np.argmax(self.scores))

    def greedy(self) -> int:
        """Most probable action; ``np.argmax`` already picks the lowest id on ties."""
        return int(np.argmax(np.where(self.mask, self.probs, -1.0)))


@dataclass
class ForwardCache:
    adj: np.ndarray
    inputs: list[np.ndarray]
    pre: list[np.ndarray]
    dropout_masks: list[np.ndarray] | None
    head_in: np.ndarray
    head_pre: np.ndarray
    head_act: np.ndarray
    dist: ActionDistribution
    param_ids: tuple[int, ...]


def masked_softmax(scores: np.ndarray, mask: np.ndarray) -> np.ndarray:
    z = np.where(mask, scores, -np.inf)
    z = z - z[mask].max()
    e = np.where(mask, np.exp(z), 0.0)
    return e / e.sum()


def draw_dropout_masks(
    model: PolicyModel, n: int, rng: np.random.Generator
) -> list[np.ndarray]:
    """Inverted-dropout multipliers, one ``(n, dim)`` array per GCN layer."""
    keep = 1.0 - model.dropout
    return [
        (rng.random((n, model.dim)) < keep).astype(np.float64) / keep
        for _ in range(model.layers)
    ]


def forward(
    model: PolicyModel,
    adj: np.ndarray,
    features: np.ndarray,
    mask: np.ndarray,
    training: bool = False,
    rng: np.random.Generator | None = None,
    dropout_masks: list[np.ndarray] | None = None,
) -> tuple[ActionDistribution, ForwardCache]:
    """Action distribution for one state.

    ``adj`` is the normalized adjacency of the query. When ``training`` is
    set, dropout follows every GCN activation; pass ``dropout_masks`` to
    replay a previous draw, otherwise they are drawn from ``rng``.
    """
    n = features.shape[0]
    mask = np.asarray(mask, dtype=bool)
    if features.shape != (n, model.in_dim) or adj.shape != (n, n) or mask.shape != (n,):
        raise ValueError("feature, adjacency and mask shapes disagree")
    if not mask.any():
        raise ValueError("empty action space")
    if training and model.dropout > 0 and dropout_masks is None:
        if rng is None:
            raise ValueError("training forward needs an rng or explicit dropout masks")
        dropout_masks = draw_dropout_masks(model, n, rng)
    if not training or model.dropout == 0:
        dropout_masks = None

    P = model.params
    h = features
    inputs, pre = [], []
    for l in range(model.layers):
        inputs.append(h)
        z = adj @ h @ P[f"gcn{l}.weight"] + P[f"gcn{l}.bias"]
        pre.append(z)
        h = np.maximum(z, 0.0)
        if dropout_masks is not None:
            h = h * dropout_masks[l]
    head_pre = h @ P["mlp1.weight"] + P["mlp1.bias"]
    head_act = np.maximum(head_pre, 0.0)
    scores = (head_act @ P["mlp2.weight"] + P["mlp2.bias"])[:, 0]
    dist = ActionDistribution(masked_softmax(scores, mask), mask, scores)
    cache = ForwardCache(
        adj, inputs, pre, dropout_masks, h, head_pre, head_act, dist,
        tuple(id(v) for v in P.values()),
    )
    return dist, cache


def backward(
    model: PolicyModel, cache: ForwardCache, grad_probs: np.ndarray
) -> dict[str, np.ndarray]:
    """Gradients of a scalar loss w.r.t. every parameter.

    ``grad_probs`` is dLoss/dp for each vertex's probability; entries
    outside the action space are ignored.
    """
    if cache.param_ids != tuple(id(v) for v in model.params.values()):
        raise ValueError("forward cache was produced by a different model")
    P = model.params
    dist = cache.dist
    g = np.where(dist.mask, np.asarray(grad_probs, dtype=np.float64), 0.0)
    p = dist.probs
    d_scores = p * (g - (p * g).sum())
    grads: dict[str, np.ndarray] = {}

    ds = d_scores[:, None]
    grads["mlp2.weight"] = cache.head_act.T @ ds
    grads["mlp2.bias"] = ds.sum(axis=0, keepdims=True)
    d_head = (ds @ P["mlp2.weight"].T) * (cache.head_pre > 0)
    grads["mlp1.weight"] = cache.head_in.T @ d_head
    grads["mlp1.bias"] = d_head.sum(axis=0, keepdims=True)
    dh = d_head @ P["mlp1.weight"].T

    for l in reversed(range(model.layers)):
        if cache.dropout_masks is not None:
            dh = dh * cache.dropout_masks[l]
        dz = dh * (cache.pre[l] > 0)
        propagated = cache.adj @ cache.inputs[l]
        grads[f"gcn{l}.weight"] = propagated.T @ dz
        grads[f"gcn{l}.bias"] = dz.sum(axis=0, keepdims=True)
        dh = cache.adj.T @ (dz @ P[f"gcn{l}.weight"].T)
    return {k: grads[k] for k in P}


# -- checkpoints ---------------------------------------------------------------


def dumps_model(model: PolicyModel) -> str:
    lines = [
        f"{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}",
        f"layers={model.layers} dim={model.dim} in={model.in_dim} "
        f"dropout={model.dropout!r} seed={model.seed}",
    ]
    for name, arr in model.params.items():
        rows, cols = arr.shape
        lines.append(f"W {name} {rows} {cols}")
        lines.extend(" ".join(format(x, ".17g") for x in row) for row in arr.tolist())
    return "\n".join(lines) + "\n"


def loads_model(text: str) -> PolicyModel:
    lines = text.splitlines()
    if not lines or not lines[0].startswith(CHECKPOINT_MAGIC + " "):
        raise CheckpointError("not a policy checkpoint (bad magic)")
    version = lines[0][len(CHECKPOINT_MAGIC) + 1 :].strip()
    if version != CHECKPOINT_VERSION:
        raise CheckpointVersionError(f"unsupported checkpoint version {version!r}")
    if len(lines) < 2:
        raise CheckpointError("missing hyperparameter line")
    try:
        hp = dict(tok.split("=", 1) for tok in lines[1].split())
        layers, dim, in_dim = int(hp["layers"]), int(hp["dim"]), int(hp["in"])
        dropout, seed = float(hp["dropout"]), int(hp["seed"])
    except (KeyError, ValueError) as exc:
        raise CheckpointError(f"bad hyperparameter line: {lines[1]!r}") from exc
    if in_dim != FEATURE_DIM:
        raise CheckpointDimensionError(f"input width {in_dim}, expected {FEATURE_DIM}")
    if layers < 1 or dim < 1:
        raise CheckpointDimensionError("non-positive layer count or dimension")

    expected = param_shapes(layers, dim, in_dim)
    params: dict[str, np.ndarray] = {}
    i = 2
    while i < len(lines):
        head = lines[i].split()
        i += 1
        if not head:
            continue
        if len(head) != 4 or head[0] != "W":
            raise CheckpointError(f"line {i}: expected 'W <name> <rows> <cols>'")
        name = head[1]
        try:
            rows, cols = int(head[2]), int(head[3])
        except ValueError as exc:
            raise CheckpointError(f"line {i}: bad matrix shape") from exc
        if name not in expected:
            raise CheckpointError(f"line {i}: unexpected matrix {name!r}")
        if (rows, cols) != expected[name]:
            raise CheckpointDimensionError(
                f"matrix {name} is {rows}x{cols}, header implies {expected[name][0]}x{expected[name][1]}"
            )
        if name in params:
            raise CheckpointError(f"line {i}: matrix {name!r} repeated")
        body = lines[i : i + rows]
        if len(body) != rows:
            raise CheckpointError(f"matrix {name}: truncated")
        try:
            arr = np.array([[float(x) for x in row.split()] for row in body], dtype=np.float64)
        except ValueError as exc:
            raise CheckpointError(f"matrix {name}: non-numeric entry") from exc
        if arr.shape != (rows, cols):
            raise CheckpointDimensionError(f"matrix {name}: rows do not have {cols} columns")
        params[name] = arr
        i += rows
    missing = expected.keys() - params.keys()
    if missing:
        raise CheckpointError(f"missing matrices: {sorted(missing)}")
    ordered = {k: params[k] for k in expected}
    return PolicyModel(layers, dim, dropout, seed, ordered, in_dim)


def save_model(model: PolicyModel, path: str | Path) -> None:
    Path(path).write_text(dumps_model(model), encoding="ascii")


def load_model(path: str | Path) -> PolicyModel:
    try:
        text = Path(path).read_text(encoding="ascii")
    except UnicodeDecodeError as exc:
        raise CheckpointError(f"{path}: not a text checkpoint") from exc
    return loads_model(text)
