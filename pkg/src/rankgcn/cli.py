"""Command-line front end: one subcommand per pipeline stage plus the full
protocol. Exit codes: 0 success, 1 usage error, 2 data/validation error,
3 divergence or other runtime failure."""

from __future__ import annotations

import argparse
import sys

from .datasets import load_features, load_labels, save_features, save_labels, synth_blobs
from .errors import ConfigError, DivergenceError, ParseError, RankGCNError, ValidationError
from .gcn import TrainConfig
from .graphs import (
    build_normalized_adjacency,
    knn_edges,
    load_edges,
    reciprocal_edges,
    save_adjacency,
    save_edges,
)
from .protocol import PipelineConfig, run_protocol
from .ranking import compute_ranked_lists, load_ranked_lists, save_ranked_lists
from .rerank import RerankerSpec, rerank


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="rankgcn", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="generate a synthetic blob dataset")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--classes", type=int, required=True)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--spread", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--features-out", required=True)
    p.add_argument("--labels-out", required=True)
    p.add_argument("--format", choices=("csv", "binary"), default="csv")

    p = sub.add_parser("rank", help="compute ranked lists for every element")
    p.add_argument("--features", required=True)
    p.add_argument("--format", choices=("csv", "binary"), default="csv")
    p.add_argument("--depth", type=int, default=None)
    p.add_argument("--backend", choices=("exact", "ball_tree"), default="exact")
    p.add_argument("--out", required=True)

    p = sub.add_parser("rerank", help="re-rank lists with an unsupervised method")
    p.add_argument("--lists", required=True)
    p.add_argument("--method", choices=("none", "correlation", "diffusion"), required=True)
    p.add_argument("--method-k", type=int, default=40)
    p.add_argument("--iterations", type=int, default=2)
    p.add_argument("--alpha", type=float, default=0.85)
    p.add_argument("--eps", type=float, default=1e-8)
    p.add_argument("--max-iter", type=int, default=1000)
    p.add_argument("--out", required=True)

    p = sub.add_parser("graph", help="build an edge set from ranked lists")
    p.add_argument("--lists", required=True)
    p.add_argument("--kind", choices=("knn", "reciprocal"), required=True)
    p.add_argument("--k", type=int, default=40)
    p.add_argument("--out", required=True)
    p.add_argument("--adjacency-out", default=None)

    p = sub.add_parser("train", help="run the fold protocol on a prebuilt graph")
    _add_protocol_flags(p)
    p.add_argument("--edges", required=True)

    p = sub.add_parser("pipeline", help="run the full pipeline end to end")
    _add_protocol_flags(p)
    p.add_argument("--rerank", choices=("none", "correlation", "diffusion"), default="none")
    p.add_argument("--graph", choices=("knn", "reciprocal"), default="knn")
    p.add_argument("--k", type=int, default=40)
    p.add_argument("--method-k", type=int, default=40)
    p.add_argument("--iterations", type=int, default=2)
    p.add_argument("--alpha", type=float, default=0.85)
    p.add_argument("--eps", type=float, default=1e-8)
    p.add_argument("--max-iter", type=int, default=1000)
    p.add_argument("--depth", type=int, default=None)
    p.add_argument("--backend", choices=("exact", "ball_tree"), default="exact")
    return parser


def _add_protocol_flags(p) -> None:
    p.add_argument("--features", required=True)
    p.add_argument("--format", choices=("csv", "binary"), default="csv")
    p.add_argument("--labels", required=True)
    p.add_argument("--model", choices=("gcn", "sgc", "appnp"), default="gcn")
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--lr", type=float, default=1e-5)
    p.add_argument("--hidden", type=int, default=256)
    p.add_argument("--sgc-power", type=int, default=2)
    p.add_argument("--appnp-alpha", type=float, default=0.1)
    p.add_argument("--appnp-steps", type=int, default=10)
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--runs", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="JSON report path")
    p.add_argument("--cells", default=None, help="per-cell CSV path")
    p.add_argument("--predictions", default=None, help="per-cell predictions CSV path")


def _cmd_synth(args) -> int:
    X, labels = synth_blobs(args.n, args.classes, args.dim, args.spread, args.seed)
    save_features(args.features_out, X, format=args.format)
    save_labels(args.labels_out, labels)
    print(f"wrote {args.n} x {args.dim} features and {args.classes}-class labels")
    return 0


def _cmd_rank(args) -> int:
    X = load_features(args.features, format=args.format)
    if args.depth is not None and args.depth > X.shape[0]:
        raise ConfigError(f"--depth {args.depth} exceeds collection size {X.shape[0]}")
    lists = compute_ranked_lists(X, depth=args.depth, backend=args.backend)
    save_ranked_lists(args.out, lists)
    print(f"wrote ranked lists: {lists.n} queries, depth {lists.depth}")
    return 0


def _cmd_rerank(args) -> int:
    lists = load_ranked_lists(args.lists)
    spec = RerankerSpec(
        kind={"none": "identity"}.get(args.method, args.method),
        k_method=args.method_k,
        iterations=args.iterations,
        alpha=args.alpha,
        eps=args.eps,
        max_iter=args.max_iter,
    )
    if spec.kind == "correlation" and spec.k_method > lists.depth:
        raise ConfigError(f"--method-k {args.method_k} exceeds list depth {lists.depth}")
    out = rerank(lists, spec)
    save_ranked_lists(args.out, out)
    print(f"re-ranked {out.n} lists with method {args.method}")
    return 0


def _cmd_graph(args) -> int:
    lists = load_ranked_lists(args.lists)
    if args.k >= lists.depth:
        raise ConfigError(f"--k {args.k} needs lists deeper than k (depth={lists.depth})")
    builder = knn_edges if args.kind == "knn" else reciprocal_edges
    edges = builder(lists, args.k)
    save_edges(args.out, edges)
    if args.adjacency_out:
        save_adjacency(args.adjacency_out, build_normalized_adjacency(edges))
    print(f"wrote {len(edges)} edges ({args.kind}, k={args.k})")
    return 0


def _protocol_config(args, reranker: RerankerSpec, graph_kind: str, graph_k: int,
                     depth=None, backend="exact") -> PipelineConfig:
    return PipelineConfig(
        reranker=reranker,
        graph_kind=graph_kind,
        graph_k=graph_k,
        variant=args.model,
        hidden=args.hidden,
        sgc_power=args.sgc_power,
        appnp_alpha=args.appnp_alpha,
        appnp_steps=args.appnp_steps,
        train=TrainConfig(epochs=args.epochs, learning_rate=args.lr),
        depth=depth,
        backend=backend,
        num_folds=args.folds,
        runs=args.runs,
        base_seed=args.seed,
    )


def _emit_report(report, args) -> None:
    report.write_json(args.out)
    if args.cells:
        report.write_cells_csv(args.cells)
    if args.predictions:
        report.write_predictions_csv(args.predictions)
    mean = report.aggregates["accuracy_mean"]
    std = report.aggregates["accuracy_std"]
    print(f"{100 * mean:.2f} ± {100 * std:.4f}")


def _cmd_train(args) -> int:
    X = load_features(args.features, format=args.format)
    labels = load_labels(args.labels, n=X.shape[0])
    edges = load_edges(args.edges, n=X.shape[0])
    config = _protocol_config(args, RerankerSpec(), "knn", max(1, X.shape[0] - 1))
    report = run_protocol(X, labels, config, edges=edges,
                          collect_predictions=args.predictions is not None)
    _emit_report(report, args)
    return 0


def _cmd_pipeline(args) -> int:
    X = load_features(args.features, format=args.format)
    labels = load_labels(args.labels, n=X.shape[0])
    spec = RerankerSpec(
        kind={"none": "identity"}.get(args.rerank, args.rerank),
        k_method=args.method_k,
        iterations=args.iterations,
        alpha=args.alpha,
        eps=args.eps,
        max_iter=args.max_iter,
    )
    config = _protocol_config(args, spec, args.graph, args.k,
                              depth=args.depth, backend=args.backend)
    report = run_protocol(X, labels, config,
                          collect_predictions=args.predictions is not None)
    _emit_report(report, args)
    return 0


_COMMANDS = {
    "synth": _cmd_synth,
    "rank": _cmd_rank,
    "rerank": _cmd_rerank,
    "graph": _cmd_graph,
    "train": _cmd_train,
    "pipeline": _cmd_pipeline,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        return _COMMANDS[args.command](args)
    except (ParseError, ValidationError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DivergenceError, RankGCNError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
