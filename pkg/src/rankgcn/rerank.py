"""Unsupervised re-ranking of ranked lists (rank-based manifold learning).

Every re-ranker maps a set of ranked lists to a new set with the same query
count and depth, using only rank information, never labels or raw features:

- ``identity``: returns the input unchanged.
- ``correlation``: re-sorts each list by top-k neighborhood overlap between
  the query and each listed element, repeated for a fixed iteration count.
- ``diffusion``: converts rank positions to affinities, symmetrizes and
  row-normalizes them, and runs a damped diffusion to a fixed point whose
  rows induce the new lists. Convergence is guaranteed because the update
  is a contraction with factor alpha < 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, ValidationError
from .ranking import RankedLists
from .validation import check_open_unit, check_positive_int

KINDS = ("identity", "correlation", "diffusion")

# Above this many nodes the diffusion fixed point is evaluated by composing
# iteration steps with dense BLAS products instead of stepping one at a time;
# see _fixed_point_composed.
_STEPWISE_MAX_N = 512


@dataclass(frozen=True)
class RerankerSpec:
    """Re-ranker selection plus the knobs of both concrete methods."""

    kind: str = "identity"
    k_method: int = 40
    iterations: int = 2
    alpha: float = 0.85
    eps: float = 1e-8
    max_iter: int = 1000

    def validate(self, depth: int | None = None) -> None:
        if self.kind not in KINDS:
            raise ConfigError(f"unknown re-ranker kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == "correlation":
            check_positive_int(self.k_method, "k_method", minimum=1)
            check_positive_int(self.iterations, "iterations", minimum=0)
            if depth is not None and self.k_method > depth:
                raise ConfigError(
                    f"k_method={self.k_method} exceeds ranked-list depth {depth}"
                )
        if self.kind == "diffusion":
            check_open_unit(self.alpha, "alpha")
            if not self.eps > 0:
                raise ConfigError(f"eps must be > 0, got {self.eps}")
            check_positive_int(self.max_iter, "max_iter", minimum=1)


def rerank(T: RankedLists, spec: RerankerSpec) -> RankedLists:
    """Apply the re-ranker described by `spec`; output keeps n and depth."""
    spec.validate(depth=T.depth)
    if spec.kind == "identity":
        return T
    if spec.kind == "correlation":
        return rerank_correlation(T, spec.k_method, spec.iterations)
    return rerank_diffusion(T, spec.alpha, spec.eps, spec.max_iter)


def rerank_correlation(T: RankedLists, k: int, iterations: int = 2) -> RankedLists:
    """Re-sort each list by overlap of top-k neighborhoods.

    One iteration scores every element i of list q with
    s(q, i) = |N(q, k) & N(i, k)| / k, where N(., k) is the first k entries
    of the current list (the query's own rank-1 entry included), then sorts
    the list by descending s with ties broken by previous rank, then index.
    """
    check_positive_int(iterations, "iterations", minimum=0)
    k = check_positive_int(k, "k", minimum=1)
    if k > T.depth:
        raise ConfigError(f"k={k} exceeds ranked-list depth {T.depth}")
    n, depth = T.n, T.depth
    lists = np.asarray(T.lists)
    positions = np.arange(depth)
    for _ in range(iterations):
        topk = lists[:, :k]
        indicator = sp.csr_matrix(
            (
                np.ones(n * k, dtype=np.int64),
                (np.repeat(np.arange(n), k), topk.ravel()),
            ),
            shape=(n, n),
        )
        overlap = (indicator @ indicator.T).tocsr()
        overlap.sort_indices()
        new_lists = np.empty_like(lists)
        for q in range(n):
            row = lists[q]
            cols = overlap.indices[overlap.indptr[q] : overlap.indptr[q + 1]]
            vals = overlap.data[overlap.indptr[q] : overlap.indptr[q + 1]]
            at = np.searchsorted(cols, row)
            at = np.minimum(at, cols.size - 1)
            scores = np.where(cols[at] == row, vals[at], 0) / k
            order = np.lexsort((row, positions, -scores))
            new_lists[q] = row[order]
        lists = new_lists
    return T if iterations == 0 else RankedLists(lists)


def rank_affinity(T: RankedLists) -> sp.csr_matrix:
    """Sparse affinity W with w[q, i] = 1 - (rank_q(i) - 1) / depth.

    Listed elements get affinities in (0, 1]; everything else is 0. The
    affinity depends only on rank positions, never on distances.
    """
    n, depth = T.n, T.depth
    weights = 1.0 - np.arange(depth) / depth
    data = np.tile(weights, n)
    rows = np.repeat(np.arange(n), depth)
    return sp.csr_matrix((data, (rows, T.lists.ravel())), shape=(n, n))


def _transition_matrix(T: RankedLists) -> sp.csr_matrix:
    W = rank_affinity(T)
    Wh = (W + W.T) * 0.5
    rowsums = np.asarray(Wh.sum(axis=1)).ravel()
    if not np.all(rowsums > 0):
        raise ValidationError("affinity matrix has an all-zero row")
    return (sp.diags(1.0 / rowsums) @ Wh).tocsr()


def _stop_threshold(alpha: float, eps: float) -> float:
    # Tighter than eps so the returned iterate provably lies within a few eps
    # of the true fixed point for every alpha, not only small ones.
    return eps * min(1.0, (1.0 - alpha) / (2.0 * alpha))


def _fixed_point_stepwise(P: sp.csr_matrix, alpha, eps, max_iter, collect_deltas=None):
    n = P.shape[0]
    threshold = _stop_threshold(alpha, eps)
    diag = np.arange(n)
    F = np.eye(n)
    for _ in range(max_iter):
        F_next = alpha * (P @ F)
        F_next[diag, diag] += 1.0 - alpha
        delta = float(np.abs(F_next - F).max())
        if collect_deltas is not None:
            collect_deltas.append(delta)
        if delta < threshold:
            return F
        F = F_next
    return F


def _fixed_point_composed(P: sp.csr_matrix, alpha, eps, max_iter):
    """Evaluate the same iteration by binary composition of steps.

    The t-th iterate is F_t = (1-a) * sum_{s<t} (aP)^s + (aP)^t, so a pair
    (F_a, G_a = (aP)^a) composes as F_{a+b} = F_a + G_a (F_b - I) and
    G_{a+b} = G_a G_b. Successive changes obey |F_{t+1} - F_t| <= alpha^(t+1)
    because P is row-stochastic, which certifies the step count up front;
    square-and-multiply then reaches it in O(log t) dense products.
    """
    n = P.shape[0]
    threshold = _stop_threshold(alpha, eps)
    if alpha < threshold:
        return np.eye(n)
    steps = min(max(1, math.ceil(math.log(threshold) / math.log(alpha)) - 1), max_iter)
    base_G = (alpha * P).toarray()
    base_F = base_G.copy()
    base_F[np.arange(n), np.arange(n)] += 1.0 - alpha
    F, G = base_F.copy(), base_G.copy()
    eye = np.eye(n)
    for bit in bin(steps)[3:]:
        F = F + G @ (F - eye)
        G = G @ G
        if bit == "1":
            F = F + G @ (base_F - eye)
            G = G @ base_G
    return F


def _diffusion_fixed_point(P, alpha, eps, max_iter, method="auto", collect_deltas=None):
    if method == "auto":
        method = "stepwise" if P.shape[0] <= _STEPWISE_MAX_N else "composed"
    if method == "stepwise":
        return _fixed_point_stepwise(P, alpha, eps, max_iter, collect_deltas)
    if method == "composed":
        return _fixed_point_composed(P, alpha, eps, max_iter)
    raise ConfigError(f"unknown fixed-point method {method!r}")


def rerank_diffusion(
    T: RankedLists, alpha: float = 0.85, eps: float = 1e-8, max_iter: int = 1000
) -> RankedLists:
    """Re-rank through a damped diffusion over the rank affinity graph.

    Builds W from rank positions, symmetrizes it to (W + W^T)/2, row-
    normalizes to P, and iterates F <- alpha * P F + (1 - alpha) * I from
    F = I until the max-abs change drops below eps (or max_iter is hit);
    the spectral radius of alpha * P is at most alpha, so the iteration
    always contracts. List q of the output holds the depth indices with the
    largest F[q, :], ties broken by original rank and then by index.
    """
    alpha = check_open_unit(alpha, "alpha")
    if not eps > 0:
        raise ConfigError(f"eps must be > 0, got {eps}")
    max_iter = check_positive_int(max_iter, "max_iter", minimum=1)
    n, depth = T.n, T.depth
    P = _transition_matrix(T)
    F = _diffusion_fixed_point(P, alpha, eps, max_iter)
    lists = np.asarray(T.lists)
    new_lists = np.empty_like(lists)
    original_rank = np.empty(n, dtype=np.int64)
    for q in range(n):
        row = F[q]
        original_rank.fill(depth)
        original_rank[lists[q]] = np.arange(depth)
        if n > depth:
            cutoff = np.partition(row, n - depth)[n - depth]
            cand = np.flatnonzero(row >= cutoff)
        else:
            cand = np.arange(n)
        order = np.lexsort((cand, original_rank[cand], -row[cand]))
        new_lists[q] = cand[order[:depth]]
    return RankedLists(new_lists)
