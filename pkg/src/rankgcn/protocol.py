"""The multi-run, k-fold semi-supervised evaluation protocol.

One protocol execution ranks the whole collection, re-ranks it, and builds
the graph exactly once (those stages are unsupervised and identical for
every run), then trains one fresh model per (run, fold) cell with the fold
as the only labeled set and everything else as the evaluation set. Cell
seeds are derived from the base seed through a 64-bit mixer so cells are
independent but reproducible.
"""

from __future__ import annotations

import json
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field

import numpy as np

from .datasets import LabelAssignment, make_folds
from .errors import ConfigError, RankGCNError, ValidationError
from .gcn import VARIANTS, TrainConfig, forward, predict, train
from .graphs import GRAPH_KINDS, build_normalized_adjacency, knn_edges, reciprocal_edges
from .metrics import accuracy, weighted_f_measure
from .ranking import compute_ranked_lists
from .rerank import RerankerSpec, rerank
from .validation import check_features, check_positive_int

STAGES = ("rank", "rerank", "graph", "train", "test")

_MASK64 = (1 << 64) - 1


def mix_seed(base: int, *parts: int) -> int:
    """Mix a base seed with integer coordinates into a fresh 64-bit seed.

    Runs one splitmix64 scramble per coordinate, so (base, run, fold) cells
    get well-separated streams while staying reproducible.
    """
    state = int(base) & _MASK64
    for part in parts:
        state = (state + 0x9E3779B97F4A7C15 + (int(part) & _MASK64)) & _MASK64
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        state = z ^ (z >> 31)
    return state


class StageTimings:
    """Accumulates wall-clock seconds per pipeline stage label."""

    def __init__(self):
        self._seconds = {label: 0.0 for label in STAGES}

    @contextmanager
    def stage(self, label: str):
        if label not in self._seconds:
            raise ConfigError(f"unknown stage label {label!r}; expected one of {STAGES}")
        start = time.perf_counter()
        try:
            yield
        finally:
            self._seconds[label] += time.perf_counter() - start

    def add(self, label: str, seconds: float) -> None:
        if label not in self._seconds:
            raise ConfigError(f"unknown stage label {label!r}; expected one of {STAGES}")
        self._seconds[label] += seconds

    def total(self, label: str) -> float:
        return self._seconds[label]

    def as_dict(self) -> dict[str, float]:
        return dict(self._seconds)


def time_stage(label: str, work, timings: StageTimings | None = None):
    """Run `work()` and return (result, wall-clock seconds under `label`)."""
    start = time.perf_counter()
    result = work()
    seconds = time.perf_counter() - start
    if timings is not None:
        timings.add(label, seconds)
    return result, seconds


@dataclass
class PipelineConfig:
    """Everything one protocol execution needs, with the stock defaults.

    `depth` is the ranked-list length; when None it resolves to
    min(n, 5 * max(graph_k, reranker.k_method)) so re-rankers see context
    well beyond the neighborhoods that end up in the graph. `graph_k` and
    `k_method` are clamped on tiny collections.
    """

    reranker: RerankerSpec = field(default_factory=RerankerSpec)
    graph_kind: str = "knn"
    graph_k: int = 40
    variant: str = "gcn"
    hidden: int = 256
    sgc_power: int = 2
    appnp_alpha: float = 0.1
    appnp_steps: int = 10
    train: TrainConfig = field(default_factory=TrainConfig)
    depth: int | None = None
    backend: str = "exact"
    num_folds: int = 10
    runs: int = 5
    base_seed: int = 0

    def effective_graph_k(self, n: int) -> int:
        return min(self.graph_k, n - 1)

    def effective_method_k(self, n: int) -> int:
        return min(self.reranker.k_method, self.resolved_depth(n))

    def resolved_depth(self, n: int) -> int:
        if self.depth is not None:
            return min(self.depth, n)
        k = max(self.effective_graph_k(n), 1)
        if self.reranker.kind == "correlation":
            k = max(k, min(self.reranker.k_method, n - 1))
        return min(n, 5 * k)

    def validate(self) -> None:
        if self.graph_kind not in GRAPH_KINDS:
            raise ConfigError(
                f"unknown graph kind {self.graph_kind!r}; expected one of {GRAPH_KINDS}"
            )
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        self.reranker.validate()
        check_positive_int(self.graph_k, "graph_k")
        check_positive_int(self.runs, "runs")
        check_positive_int(self.num_folds, "num_folds", minimum=2)

    def summary(self) -> dict:
        out = asdict(self)
        out["learning_rate"] = out["train"].pop("learning_rate")
        out["epochs"] = out["train"].pop("epochs")
        return out


@dataclass
class CellResult:
    run: int
    fold: int
    accuracy: float
    f1: float
    train_s: float
    test_s: float
    seed: int
    train_size: int
    eval_size: int


@dataclass
class RunReport:
    """Per-cell metrics plus aggregates, timings, and the echoed config."""

    config: dict
    cells: list[CellResult]
    aggregates: dict[str, float]
    timings: dict[str, float]
    predictions: dict[tuple[int, int], np.ndarray] | None = None

    def to_dict(self, include_timings: bool = True) -> dict:
        out = {
            "config": self.config,
            "cells": [asdict(cell) for cell in self.cells],
            "aggregates": dict(self.aggregates),
        }
        if include_timings:
            out["timings"] = dict(self.timings)
        else:
            for cell in out["cells"]:
                cell.pop("train_s")
                cell.pop("test_s")
        return out

    def to_json(self, include_timings: bool = True) -> str:
        return json.dumps(self.to_dict(include_timings), indent=2, sort_keys=True)

    def write_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())
            fh.write("\n")

    def write_cells_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("run,fold,accuracy,f1,train_s,test_s\n")
            for cell in self.cells:
                fh.write(
                    f"{cell.run},{cell.fold},{cell.accuracy!r},{cell.f1!r},"
                    f"{cell.train_s!r},{cell.test_s!r}\n"
                )

    def write_predictions_csv(self, path) -> None:
        if self.predictions is None:
            raise ConfigError("protocol was run without prediction collection")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("run,fold,node,prediction\n")
            for (run, fold), preds in sorted(self.predictions.items()):
                for node, cls in enumerate(preds):
                    fh.write(f"{run},{fold},{node},{cls}\n")


def _aggregate(cells: list[CellResult]) -> dict[str, float]:
    acc = np.asarray([cell.accuracy for cell in cells])
    f1 = np.asarray([cell.f1 for cell in cells])
    return {
        "accuracy_mean": float(acc.mean()),
        "accuracy_std": float(acc.std()),
        "f1_mean": float(f1.mean()),
        "f1_std": float(f1.std()),
    }


def build_graph_inputs(X, config: PipelineConfig, timings: StageTimings):
    """Shared unsupervised stages: rank, re-rank, and graph construction."""
    n = X.shape[0]
    depth = config.resolved_depth(n)
    with timings.stage("rank"):
        lists = compute_ranked_lists(X, depth=depth, backend=config.backend)
    spec = config.reranker
    if spec.kind == "correlation" and spec.k_method > depth:
        spec = RerankerSpec(
            kind=spec.kind,
            k_method=depth,
            iterations=spec.iterations,
            alpha=spec.alpha,
            eps=spec.eps,
            max_iter=spec.max_iter,
        )
    with timings.stage("rerank"):
        reranked = rerank(lists, spec)
    builder = knn_edges if config.graph_kind == "knn" else reciprocal_edges
    with timings.stage("graph"):
        edges = builder(reranked, config.effective_graph_k(n))
        A_hat = build_normalized_adjacency(edges)
    return reranked, edges, A_hat


def run_protocol(
    X,
    labels: LabelAssignment,
    config: PipelineConfig,
    edges=None,
    collect_predictions: bool = False,
) -> RunReport:
    """Execute the full protocol and assemble a RunReport.

    Ground-truth labels must be complete; only the training fold's labels
    are ever passed to training. When `edges` is given the rank, re-rank,
    and graph stages are skipped and the supplied edge set is used directly.
    """
    config.validate()
    X = check_features(X)
    n = X.shape[0]
    if labels.n != n:
        raise ValidationError(f"labels cover {labels.n} nodes, features have {n}")
    if not labels.is_complete():
        raise ValidationError("the protocol needs a complete ground-truth labeling")
    timings = StageTimings()
    if edges is None:
        _, edges, A_hat = build_graph_inputs(X, config, timings)
    else:
        with timings.stage("graph"):
            A_hat = build_normalized_adjacency(edges)
    folds = make_folds(n, config.num_folds, seed=mix_seed(config.base_seed, 0x0F01D5))
    cells: list[CellResult] = []
    predictions: dict[tuple[int, int], np.ndarray] = {}
    for run in range(config.runs):
        for fold in range(config.num_folds):
            seed = mix_seed(config.base_seed, run, fold)
            try:
                cell = _run_cell(
                    X, A_hat, labels, folds, run, fold, seed, config, timings, predictions,
                    collect_predictions,
                )
            except RankGCNError as exc:
                raise type(exc)(f"run {run}, fold {fold}: {exc}") from exc
            cells.append(cell)
    return RunReport(
        config=config.summary(),
        cells=cells,
        aggregates=_aggregate(cells),
        timings=timings.as_dict(),
        predictions=predictions if collect_predictions else None,
    )


def _run_cell(
    X, A_hat, labels, folds, run, fold, seed, config, timings, predictions, collect
):
    train_nodes = folds.fold_nodes(fold)
    eval_nodes = folds.complement(fold)
    fold_labels = labels.restrict(train_nodes)
    train_config = TrainConfig(
        epochs=config.train.epochs,
        learning_rate=config.train.learning_rate,
        beta1=config.train.beta1,
        beta2=config.train.beta2,
        adam_eps=config.train.adam_eps,
        seed=seed,
        record_history=False,
    )
    (params, _), train_s = time_stage(
        "train",
        lambda: train(
            config.variant,
            X,
            A_hat,
            fold_labels,
            train_nodes,
            train_config,
            hidden=config.hidden,
            sgc_power=config.sgc_power,
            appnp_alpha=config.appnp_alpha,
            appnp_steps=config.appnp_steps,
        ),
        timings,
    )

    def _evaluate():
        Z = forward(params, X, A_hat)
        preds = predict(Z)
        return (
            preds,
            accuracy(preds, labels, eval_nodes),
            weighted_f_measure(preds, labels, eval_nodes),
        )

    (preds, acc, f1), test_s = time_stage("test", _evaluate, timings)
    if collect:
        predictions[(run, fold)] = preds
    return CellResult(
        run=run,
        fold=fold,
        accuracy=acc,
        f1=f1,
        train_s=train_s,
        test_s=test_s,
        seed=seed,
        train_size=int(train_nodes.size),
        eval_size=int(eval_nodes.size),
    )
