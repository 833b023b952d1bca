"""kNN and reciprocal-kNN edge sets and the normalized adjacency operator."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, ParseError, ValidationError
from .ranking import RankedLists
from .validation import check_positive_int

GRAPH_KINDS = ("knn", "reciprocal")


@dataclass(frozen=True)
class EdgeSet:
    """Directed node pairs (i, j), i != j, stored sorted and duplicate-free."""

    n: int
    pairs: np.ndarray

    def __post_init__(self):
        pairs = np.asarray(self.pairs, dtype=np.int64).reshape(-1, 2)
        if pairs.size:
            if pairs.min() < 0 or pairs.max() >= self.n:
                raise ValidationError("edge endpoints outside 0..n-1")
            if np.any(pairs[:, 0] == pairs[:, 1]):
                raise ValidationError("self-pairs are not allowed in an edge set")
            keys = pairs[:, 0] * self.n + pairs[:, 1]
            order = np.argsort(keys, kind="stable")
            keys = keys[order]
            keep = np.ones(keys.size, dtype=bool)
            keep[1:] = keys[1:] != keys[:-1]
            pairs = pairs[order][keep]
        pairs.setflags(write=False)
        object.__setattr__(self, "pairs", pairs)

    def __len__(self) -> int:
        return self.pairs.shape[0]

    def to_set(self) -> set[tuple[int, int]]:
        return {(int(i), int(j)) for i, j in self.pairs}

    def is_symmetric(self) -> bool:
        forward = self.pairs[:, 0] * self.n + self.pairs[:, 1]
        backward = self.pairs[:, 1] * self.n + self.pairs[:, 0]
        return bool(np.isin(backward, forward).all())


def neighborhoods(T: RankedLists, k: int) -> np.ndarray:
    """Top-k neighbor indices per query, with the query itself skipped."""
    k = check_positive_int(k, "k", minimum=1)
    if k > T.depth - 1:
        raise ConfigError(f"k={k} needs ranked lists deeper than k (depth={T.depth})")
    out = np.empty((T.n, k), dtype=np.int64)
    for q in range(T.n):
        row = T.lists[q]
        out[q] = row[row != q][:k]
    return out


def knn_edges(T: RankedLists, k: int) -> EdgeSet:
    """Directed edges from each query to its k nearest non-self neighbors."""
    nbrs = neighborhoods(T, k)
    sources = np.repeat(np.arange(T.n, dtype=np.int64), k)
    return EdgeSet(n=T.n, pairs=np.column_stack([sources, nbrs.ravel()]))


def reciprocal_edges(T: RankedLists, k: int) -> EdgeSet:
    """Edges between pairs that appear in each other's top-k neighborhoods.

    The result is symmetric by construction and always a subset of the
    plain kNN edge set at the same k.
    """
    knn = knn_edges(T, k)
    forward = knn.pairs[:, 0] * T.n + knn.pairs[:, 1]
    backward = knn.pairs[:, 1] * T.n + knn.pairs[:, 0]
    mutual = np.isin(backward, forward)
    return EdgeSet(n=T.n, pairs=knn.pairs[mutual])


def build_normalized_adjacency(E: EdgeSet) -> sp.csr_matrix:
    """Symmetric-normalized adjacency with self-loops.

    The edge set is symmetrized, self-loops are added, and every entry (i, j)
    becomes 1 / sqrt(deg_i * deg_j) where deg counts the self-loop. The
    result is exactly symmetric with a strictly positive diagonal, and all
    its eigenvalues lie in [-1, 1].
    """
    n = E.n
    if len(E):
        sym = np.concatenate([E.pairs, E.pairs[:, ::-1]], axis=0)
    else:
        sym = np.empty((0, 2), dtype=np.int64)
    loops = np.arange(n, dtype=np.int64)
    rows = np.concatenate([sym[:, 0], loops])
    cols = np.concatenate([sym[:, 1], loops])
    keys = rows * n + cols
    keep = np.unique(keys)
    rows, cols = keep // n, keep % n
    degrees = np.bincount(rows, minlength=n)
    # sqrt of the integer degree product keeps the matrix exactly symmetric
    # and makes rows of regular graphs sum to 1 without rounding drift
    values = 1.0 / np.sqrt((degrees[rows] * degrees[cols]).astype(np.float64))
    return sp.csr_matrix((values, (rows, cols)), shape=(n, n))


def save_edges(path, E: EdgeSet) -> None:
    """Write one tab-separated "i<TAB>j" pair per line."""
    with open(path, "w", encoding="utf-8") as fh:
        for i, j in E.pairs:
            fh.write(f"{i}\t{j}\n")


def load_edges(path, n: int) -> EdgeSet:
    pairs = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ParseError(f"{path}: line {lineno}: expected 'i<TAB>j'")
            try:
                pairs.append((int(parts[0]), int(parts[1])))
            except ValueError as exc:
                raise ParseError(f"{path}: line {lineno}: {exc}") from exc
    return EdgeSet(n=n, pairs=np.asarray(pairs, dtype=np.int64).reshape(-1, 2))


def save_adjacency(path, A: sp.spmatrix) -> None:
    """Write the adjacency as "i j value" coordinate triplets."""
    coo = sp.coo_matrix(A)
    order = np.lexsort((coo.col, coo.row))
    with open(path, "w", encoding="utf-8") as fh:
        for i, j, v in zip(coo.row[order], coo.col[order], coo.data[order]):
            fh.write(f"{i} {j} {v!r}\n")
