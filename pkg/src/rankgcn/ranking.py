"""Ranked-list computation: for every element, its most similar neighbors.

Every element of the collection is taken as a query; the ranked list of a
query holds the `depth` nearest elements under Euclidean distance, nearest
first. Distance ties are broken by ascending node index, which makes the
output a total order and lets two different backends agree exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist
from sklearn.neighbors import BallTree

from .errors import ConfigError, ParseError, ValidationError
from .validation import check_features

BACKENDS = ("exact", "ball_tree")

# Relative slack applied to the depth-th neighbor distance when collecting
# ball-tree candidates; absorbs last-ulp disagreement between the tree metric
# and the canonical squared-distance key.
_RADIUS_SLACK = 1e-9


@dataclass(frozen=True)
class RankedLists:
    """One ranked list per query, stored as an (n, depth) index matrix.

    Row q holds the indices of the `depth` most similar elements to query q
    in nondecreasing distance order; rank positions are 1-based.
    """

    lists: np.ndarray

    def __post_init__(self):
        lists = np.asarray(self.lists, dtype=np.int64)
        if lists.ndim != 2:
            raise ValidationError("ranked lists must form a 2-D index matrix")
        lists.setflags(write=False)
        object.__setattr__(self, "lists", lists)
        n, depth = lists.shape
        if not 1 <= depth <= n:
            raise ValidationError(f"list depth {depth} outside 1..{n}")
        if lists.min() < 0 or lists.max() >= n:
            raise ValidationError("ranked lists contain out-of-range indices")
        if depth > 1:
            ordered = np.sort(lists, axis=1)
            repeated = np.flatnonzero((np.diff(ordered, axis=1) == 0).any(axis=1))
            if repeated.size:
                raise ValidationError(f"list {repeated[0]} contains repeated indices")

    @property
    def n(self) -> int:
        return self.lists.shape[0]

    @property
    def depth(self) -> int:
        return self.lists.shape[1]

    def rank_of(self, q: int, o: int) -> int | None:
        """1-based rank of element o in list q, or None when beyond depth."""
        if not 0 <= q < self.n:
            raise ValidationError(f"query {q} outside 0..{self.n - 1}")
        pos = np.flatnonzero(self.lists[q] == o)
        if pos.size == 0:
            return None
        return int(pos[0]) + 1


def rank_of(T: RankedLists, q: int, o: int) -> int | None:
    return T.rank_of(q, o)


def _sq_dists(X: np.ndarray, q: int, candidates: np.ndarray | None = None) -> np.ndarray:
    """Canonical squared Euclidean distances from query q.

    Both backends order neighbors with this exact computation so that tie
    groups, not just tie-free orderings, coincide.
    """
    other = X if candidates is None else X[candidates]
    return cdist(X[q : q + 1], other, metric="sqeuclidean")[0]


def _exact_lists(X: np.ndarray, depth: int) -> np.ndarray:
    n = X.shape[0]
    out = np.empty((n, depth), dtype=np.int64)
    idx = np.arange(n)
    chunk = max(1, min(n, (1 << 24) // max(n, 1)))
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        d2 = cdist(X[start:stop], X, metric="sqeuclidean")
        for q in range(start, stop):
            order = np.lexsort((idx, d2[q - start]))
            out[q] = order[:depth]
    return out


def _ball_tree_lists(X: np.ndarray, depth: int) -> np.ndarray:
    n = X.shape[0]
    tree = BallTree(X)
    dist, _ = tree.query(X, k=depth)
    radii = dist[:, -1] * (1.0 + _RADIUS_SLACK)
    candidates = tree.query_radius(X, r=radii)
    out = np.empty((n, depth), dtype=np.int64)
    for q in range(n):
        cand = np.asarray(candidates[q], dtype=np.int64)
        d2 = _sq_dists(X, q, cand)
        order = np.lexsort((cand, d2))
        out[q] = cand[order[:depth]]
    return out


def compute_ranked_lists(X, depth: int | None = None, backend: str = "exact") -> RankedLists:
    """Rank, for every query element, the `depth` nearest collection elements.

    `backend="exact"` scans all pairwise distances; `backend="ball_tree"`
    routes candidate generation through a ball tree. Both return identical
    lists, including tie order.
    """
    X = check_features(X)
    n = X.shape[0]
    if depth is None:
        depth = n
    depth = int(depth)
    if depth < 1:
        raise ConfigError(f"depth must be >= 1, got {depth}")
    if depth > n:
        raise ConfigError(f"depth {depth} exceeds collection size {n}")
    if backend == "exact":
        lists = _exact_lists(X, depth)
    elif backend == "ball_tree":
        lists = _ball_tree_lists(X, depth)
    else:
        raise ConfigError(f"unknown backend {backend!r}; expected one of {BACKENDS}")
    return RankedLists(lists)


def save_ranked_lists(path, T: RankedLists) -> None:
    """Write one line per query: the list indices, space-separated, rank 1 first."""
    with open(path, "w", encoding="utf-8") as fh:
        for row in T.lists:
            fh.write(" ".join(str(int(v)) for v in row))
            fh.write("\n")


def load_ranked_lists(path) -> RankedLists:
    rows = []
    width = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if width is None:
                width = len(parts)
            elif len(parts) != width:
                raise ParseError(f"{path}: line {lineno}: expected {width} indices, got {len(parts)}")
            try:
                rows.append([int(p) for p in parts])
            except ValueError as exc:
                raise ParseError(f"{path}: line {lineno}: {exc}") from exc
    if not rows:
        raise ParseError(f"{path}: no ranked lists")
    return RankedLists(np.asarray(rows, dtype=np.int64))
