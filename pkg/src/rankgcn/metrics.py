"""Classification metrics and neighborhood-quality diagnostics."""

from __future__ import annotations

import numpy as np

from .datasets import LabelAssignment
from .errors import ConfigError, ValidationError
from .graphs import EdgeSet, neighborhoods
from .ranking import RankedLists
from .validation import check_node_indices


def _truth_for(labels: LabelAssignment, nodes: np.ndarray) -> np.ndarray:
    try:
        return np.asarray([labels.labels[int(i)] for i in nodes], dtype=np.int64)
    except KeyError as exc:
        raise ValidationError(f"evaluation node {exc} has no ground-truth label") from exc


def _pred_for(pred, nodes: np.ndarray, n: int) -> np.ndarray:
    if isinstance(pred, dict):
        try:
            return np.asarray([pred[int(i)] for i in nodes], dtype=np.int64)
        except KeyError as exc:
            raise ValidationError(f"no prediction for node {exc}") from exc
    pred = np.asarray(pred, dtype=np.int64).ravel()
    if pred.size != n:
        raise ValidationError(f"prediction array has {pred.size} entries for {n} nodes")
    return pred[nodes]


def accuracy(pred, truth: LabelAssignment, eval_nodes) -> float:
    """Fraction of evaluation nodes whose prediction matches the truth."""
    nodes = check_node_indices(eval_nodes, truth.n, name="eval_nodes")
    if nodes.size == 0:
        raise ConfigError("evaluation set must not be empty")
    return float(np.mean(_pred_for(pred, nodes, truth.n) == _truth_for(truth, nodes)))


def weighted_f_measure(pred, truth: LabelAssignment, eval_nodes) -> float:
    """Support-weighted mean of per-class F1 over the evaluation set.

    Precision, recall, and F1 are 0 whenever their denominators vanish;
    class supports come from the ground truth restricted to the
    evaluation set.
    """
    nodes = check_node_indices(eval_nodes, truth.n, name="eval_nodes")
    if nodes.size == 0:
        raise ConfigError("evaluation set must not be empty")
    y_true = _truth_for(truth, nodes)
    y_pred = _pred_for(pred, nodes, truth.n)
    weighted = 0.0
    for cls in range(truth.c):
        support = int(np.sum(y_true == cls))
        if support == 0:
            continue
        tp = int(np.sum((y_pred == cls) & (y_true == cls)))
        fp = int(np.sum((y_pred == cls) & (y_true != cls)))
        fn = support - tp
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        weighted += support * f1
    return weighted / nodes.size


def neighbor_purity(T: RankedLists, labels: LabelAssignment, k: int) -> float:
    """Mean fraction of same-class nodes among each query's top-k neighbors."""
    nbrs = neighborhoods(T, k)
    y = labels.to_array()
    if np.any(y < 0):
        raise ValidationError("neighbor purity needs a complete labeling")
    return float(np.mean(y[nbrs] == y[:, None]))


def edge_purity(E: EdgeSet, labels: LabelAssignment) -> float:
    """Fraction of edges joining two nodes of the same class."""
    if len(E) == 0:
        raise ConfigError("edge purity is undefined for an empty edge set")
    y = labels.to_array()
    if np.any(y < 0):
        raise ValidationError("edge purity needs a complete labeling")
    return float(np.mean(y[E.pairs[:, 0]] == y[E.pairs[:, 1]]))
