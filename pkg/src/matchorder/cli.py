"""Command-line entry point: ``match``, ``train``, ``spectrum``, ``gen-queries``."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Sequence

import numpy as np

from .enumeration import Limits
from .filtering import DEFAULT_REFINE_ROUNDS, filter_candidates
from .graph import (
    ExtractionError,
    GraphFormatError,
    LabeledGraph,
    align_labels,
    compute_stats,
    extract_connected_query,
    read_graph,
    write_graph,
)
from .oracle import SizeGuardError, spectrum
from .ordering import STRATEGIES
from .pipeline import REPORT_HEADER, run_query
from .policy import CheckpointError, PolicyModel, init_weights, load_model, save_model
from .training import TrainConfig, TrainingError, train, write_metrics_csv

log = logging.getLogger("matchorder")

DEFAULT_INCREMENTAL_EPOCHS = 10


def _limit(value: int | None) -> int | None:
    return None if value is None or value <= 0 else value


def _timeout(value: float | None) -> float | None:
    return None if value is None or value <= 0 else value


def query_paths(items: Sequence[str]) -> list[Path]:
    """Expand files and directories (``*.graph`` inside, sorted) in argument order."""
    out: list[Path] = []
    for item in items:
        p = Path(item)
        if p.is_dir():
            found = sorted(p.glob("*.graph"))
            if not found:
                raise FileNotFoundError(f"no .graph files in {p}")
            out.extend(found)
        elif p.exists():
            out.append(p)
        else:
            raise FileNotFoundError(f"no such query file: {p}")
    return out


def load_queries(paths: Sequence[Path], g: LabeledGraph) -> list[LabeledGraph]:
    return [align_labels(read_graph(p), g) for p in paths]


# -- match ------------------------------------------------------------------

_worker: dict = {}


def _init_match_worker(data: str, model_path: str | None, options: dict) -> None:
    g = read_graph(data)
    _worker.update(
        g=g,
        stats=compute_stats(g),
        model=load_model(model_path) if model_path else None,
        options=options,
    )


def _match_one(path: str):
    w = _worker
    q = align_labels(read_graph(path), w["g"])
    report, matches = run_query(
        Path(path).stem,
        q,
        w["g"],
        w["stats"],
        model=w["model"],
        **w["options"],
    )
    return report.row(), matches


def cmd_match(args: argparse.Namespace) -> int:
    if args.order == "rl" and not args.model:
        args.parser.error("--order rl requires --model")
    paths = [str(p) for p in query_paths(args.queries)]
    options = dict(
        strategy=args.order,
        limits=Limits(_limit(args.limit), _timeout(args.timeout)),
        refine_rounds=args.refine_rounds,
        materialize=args.materialize is not None,
    )
    init = (args.data, args.model, options)
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs, initializer=_init_match_worker, initargs=init) as pool:
            results = list(pool.map(_match_one, paths))
    else:
        _init_match_worker(*init)
        results = [_match_one(p) for p in paths]

    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(REPORT_HEADER)
        for row, _ in results:
            w.writerow(row)
    finally:
        if args.out:
            out.close()
    if args.materialize is not None:
        _write_matches(args.materialize, results)
    return 0


def _write_matches(target: str, results) -> None:
    lines = []
    for row, matches in results:
        for m in matches:
            lines.append(row[0] + " " + " ".join(f"{u}:{m[u]}" for u in sorted(m)))
    text = "\n".join(lines) + ("\n" if lines else "")
    if target == "-":
        sys.stderr.write(text)
    else:
        Path(target).write_text(text)


# -- train ------------------------------------------------------------------


def split_queries(n: int, fraction: float, seed: int) -> tuple[list[int], list[int]]:
    """Seeded shuffle, first ``fraction`` (at least one) for training."""
    if not 0.0 < fraction <= 1.0:
        raise ValueError("--split must lie in (0, 1]")
    perm = np.random.default_rng(seed).permutation(n).tolist()
    k = max(1, int(round(fraction * n)))
    return sorted(perm[:k]), sorted(perm[k:])


def cmd_train(args: argparse.Namespace) -> int:
    g = read_graph(args.data)
    paths = query_paths(args.queries)
    queries = load_queries(paths, g)
    train_idx, held_idx = split_queries(len(queries), args.split, args.seed)

    model: PolicyModel | None = None
    if args.init:
        model = load_model(args.init)
    epochs = args.epochs
    if epochs is None:
        epochs = DEFAULT_INCREMENTAL_EPOCHS if args.init else TrainConfig.epochs
    cfg = TrainConfig(
        lr=args.lr,
        epochs=epochs,
        gamma=args.gamma,
        beta_val=args.beta_val,
        beta_h=args.beta_h,
        clip_eps=args.clip_eps,
        match_limit=_limit(args.limit),
        time_limit=_timeout(args.timeout),
        seed=args.seed,
        batch_size=args.batch_size,
        first_by_degree=args.first_by_degree,
        optimizer=args.optimizer,
        refine_rounds=args.refine_rounds,
    )
    if model is None:
        model = init_weights(args.layers, args.dim, args.seed, args.dropout)
    result = train(g, [queries[i] for i in train_idx], cfg, model=model)

    out = Path(args.out)
    save_model(result.model, out)
    metrics = Path(args.metrics) if args.metrics else out.with_name(out.name + ".metrics.csv")
    write_metrics_csv(result.metrics, metrics)
    if held_idx:
        held = out.with_name(out.name + ".heldout.txt")
        held.write_text("".join(f"{paths[i]}\n" for i in held_idx))
    log.info("trained on %d queries, %d held out", len(train_idx), len(held_idx))
    return 0


# -- spectrum ---------------------------------------------------------------


def cmd_spectrum(args: argparse.Namespace) -> int:
    g = read_graph(args.data)
    q = align_labels(read_graph(args.query), g)
    cands = filter_candidates(q, g, args.refine_rounds)
    report = spectrum(q, g, cands, args.source)
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["order", "enum_calls"])
        for order, calls in zip(report.orders, report.enum_calls):
            w.writerow([" ".join(map(str, order)), calls])
        out.write(
            f"# orders={report.orders_evaluated} min_enum_calls={report.min_enum_calls}"
            f" optimal={' '.join(map(str, report.optimal_order))}\n"
        )
    finally:
        if args.out:
            out.close()
    return 0


# -- gen-queries ------------------------------------------------------------


def query_seed(seed: int, size: int, idx: int) -> int:
    return int(np.random.SeedSequence([seed, size, idx]).generate_state(1)[0])


def cmd_gen_queries(args: argparse.Namespace) -> int:
    g = read_graph(args.data)
    try:
        sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
    except ValueError:
        args.parser.error(f"--sizes must be comma-separated integers, got {args.sizes!r}")
    if not sizes or min(sizes) < 1:
        args.parser.error("--sizes must list positive integers")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for size in sizes:
        for idx in range(args.count):
            q = extract_connected_query(g, size, query_seed(args.seed, size, idx))
            write_graph(q, out / f"query_{size}_{idx}.graph")
    return 0


# -- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="random seed (default 0)")
    common.add_argument("--jobs", type=int, default=argparse.SUPPRESS, help="worker processes (default 1)")
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    parser = argparse.ArgumentParser(
        prog="matchorder",
        parents=[common],
        description="Subgraph matching with heuristic and learned matching orders.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    m = sub.add_parser("match", parents=[common], help="filter, order and enumerate queries")
    m.add_argument("--data", required=True)
    m.add_argument("--queries", required=True, nargs="+", help="query files or directories")
    m.add_argument("--order", choices=STRATEGIES, default="ri")
    m.add_argument("--model")
    m.add_argument("--limit", type=int, default=100_000, help="match limit, <= 0 for none")
    m.add_argument("--timeout", type=float, default=500.0, help="seconds per query, <= 0 for none")
    m.add_argument("--refine-rounds", type=int, default=DEFAULT_REFINE_ROUNDS)
    m.add_argument(
        "--materialize", nargs="?", const="-", default=None, metavar="PATH",
        help="write every mapping to PATH (stderr when omitted)",
    )
    m.add_argument("--out", help="report CSV (stdout by default)")
    m.set_defaults(func=cmd_match)

    t = sub.add_parser("train", parents=[common], help="train the ordering policy")
    t.add_argument("--data", required=True)
    t.add_argument("--queries", required=True, nargs="+")
    t.add_argument("--split", type=float, default=0.5, help="training fraction of the query set")
    t.add_argument("--epochs", type=int, default=None, help="default 100, or 10 with --init")
    t.add_argument("--lr", type=float, default=1e-3)
    t.add_argument("--dim", type=int, default=64)
    t.add_argument("--layers", type=int, default=2)
    t.add_argument("--dropout", type=float, default=0.2)
    t.add_argument("--gamma", type=float, default=TrainConfig.gamma)
    t.add_argument("--beta-val", type=float, default=TrainConfig.beta_val)
    t.add_argument("--beta-h", type=float, default=TrainConfig.beta_h)
    t.add_argument("--clip-eps", type=float, default=TrainConfig.clip_eps)
    t.add_argument("--limit", type=int, default=100_000, help="training match limit")
    t.add_argument("--timeout", type=float, default=500.0)
    t.add_argument("--batch-size", type=int, default=None)
    t.add_argument("--optimizer", choices=["adam", "sgd"], default="adam")
    t.add_argument("--first-by-degree", action="store_true")
    t.add_argument("--refine-rounds", type=int, default=DEFAULT_REFINE_ROUNDS)
    t.add_argument("--init", help="checkpoint to continue from (incremental mode)")
    t.add_argument("--out", default="model.ckpt")
    t.add_argument("--metrics", help="metrics CSV (default <out>.metrics.csv)")
    t.set_defaults(func=cmd_train)

    s = sub.add_parser("spectrum", parents=[common], help="enumerate cost of every order")
    s.add_argument("--data", required=True)
    s.add_argument("--query", required=True)
    s.add_argument("--source", choices=["all_connected", "all_permutations"], default="all_connected")
    s.add_argument("--refine-rounds", type=int, default=DEFAULT_REFINE_ROUNDS)
    s.add_argument("--out")
    s.set_defaults(func=cmd_spectrum)

    gq = sub.add_parser("gen-queries", parents=[common], help="sample connected query graphs")
    gq.add_argument("--data", required=True)
    gq.add_argument("--sizes", required=True, help="comma-separated vertex counts")
    gq.add_argument("--count", type=int, default=1)
    gq.add_argument("--out", default="queries")
    gq.set_defaults(func=cmd_gen_queries)

    for p in (parser, m, t, s, gq):
        p.set_defaults(parser=p)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    args.seed = getattr(args, "seed", 0)
    args.jobs = getattr(args, "jobs", 1)
    if args.jobs < 1:
        args.parser.error("--jobs must be positive")
    logging.basicConfig(
        level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
        format="%(levelname)s %(message)s",
    )
    try:
        return args.func(args)
    except (OSError, GraphFormatError, CheckpointError, SizeGuardError, ExtractionError, TrainingError, ValueError) as exc:
        print(f"matchorder {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
