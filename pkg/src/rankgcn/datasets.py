"""Feature and label file formats, fold plans, and synthetic blob datasets."""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ParseError, ValidationError
from .validation import check_features, check_positive_int

FMAT_MAGIC = b"FMAT"
_FMAT_HEADER = struct.Struct("<4sII")


def _read_fmat(path) -> np.ndarray:
    """Read a raw FMAT block: magic, u32 n, u32 d, then n*d little-endian f32."""
    with open(path, "rb") as fh:
        header = fh.read(_FMAT_HEADER.size)
        if len(header) < _FMAT_HEADER.size:
            raise ParseError(f"{path}: truncated header")
        magic, n, d = _FMAT_HEADER.unpack(header)
        if magic != FMAT_MAGIC:
            raise ParseError(f"{path}: bad magic {magic!r}, expected {FMAT_MAGIC!r}")
        payload = fh.read()
    expected = 4 * n * d
    if len(payload) != expected:
        raise ParseError(
            f"{path}: expected {expected} payload bytes for {n}x{d}, got {len(payload)}"
        )
    values = np.frombuffer(payload, dtype="<f4").astype(np.float64)
    return values.reshape(n, d)


def _write_fmat(path, X) -> None:
    X = np.asarray(X, dtype=np.float64)
    n, d = X.shape
    with open(path, "wb") as fh:
        fh.write(_FMAT_HEADER.pack(FMAT_MAGIC, n, d))
        fh.write(np.ascontiguousarray(X, dtype="<f4").tobytes())


def _read_csv_matrix(path) -> np.ndarray:
    rows = []
    width = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if width is None:
                width = len(parts)
            elif len(parts) != width:
                raise ParseError(
                    f"{path}: line {lineno}: expected {width} values, got {len(parts)}"
                )
            try:
                rows.append([float(p) for p in parts])
            except ValueError as exc:
                raise ParseError(f"{path}: line {lineno}: {exc}") from exc
    if not rows:
        raise ParseError(f"{path}: no data rows")
    return np.asarray(rows, dtype=np.float64)


def load_features(path, format: str = "csv") -> np.ndarray:
    """Load a feature matrix from a CSV or FMAT binary file.

    Rows keep file order. Raises ParseError for malformed content and
    ValidationError for non-finite values or undersized matrices.
    """
    if format == "csv":
        X = _read_csv_matrix(path)
    elif format == "binary":
        X = _read_fmat(path)
    else:
        raise ConfigError(f"unknown feature format {format!r}")
    return check_features(X, name=str(path))


def save_features(path, X, format: str = "csv") -> None:
    """Write a feature matrix in the CSV or FMAT binary format."""
    X = check_features(X)
    if format == "csv":
        with open(path, "w", encoding="utf-8") as fh:
            for row in X:
                fh.write(",".join(repr(float(v)) for v in row))
                fh.write("\n")
    elif format == "binary":
        _write_fmat(path, X)
    else:
        raise ConfigError(f"unknown feature format {format!r}")


@dataclass(frozen=True)
class LabelAssignment:
    """Partial labeling of n nodes with dense class ids in 0..c-1.

    `labels` maps node index to class id; absent nodes are unlabeled.
    `names` gives the original label string for each class id.
    """

    n: int
    labels: dict[int, int]
    c: int
    names: tuple[str, ...]

    def __post_init__(self):
        if self.c < 1:
            raise ValidationError("class count must be >= 1")
        if len(self.names) != self.c:
            raise ValidationError("names length must equal class count")
        for node, cls in self.labels.items():
            if not 0 <= node < self.n:
                raise ValidationError(f"labeled node {node} outside 0..{self.n - 1}")
            if not 0 <= cls < self.c:
                raise ValidationError(f"class id {cls} outside 0..{self.c - 1}")

    def is_complete(self) -> bool:
        return len(self.labels) == self.n

    def labeled_nodes(self) -> np.ndarray:
        return np.asarray(sorted(self.labels), dtype=np.int64)

    def to_array(self, fill: int = -1) -> np.ndarray:
        """Dense per-node class array with `fill` for unlabeled nodes."""
        out = np.full(self.n, fill, dtype=np.int64)
        for node, cls in self.labels.items():
            out[node] = cls
        return out

    def restrict(self, nodes) -> "LabelAssignment":
        """Keep only the labels of `nodes`; class ids and names are preserved."""
        keep = set(int(v) for v in np.asarray(nodes).ravel())
        return LabelAssignment(
            n=self.n,
            labels={i: c for i, c in self.labels.items() if i in keep},
            c=self.c,
            names=self.names,
        )


def labels_from_array(y, names: tuple[str, ...] | None = None) -> LabelAssignment:
    """Build a complete LabelAssignment from a per-node class-id array."""
    y = np.asarray(y, dtype=np.int64).ravel()
    c = int(y.max()) + 1 if y.size else 0
    if y.size and y.min() < 0:
        raise ValidationError("class ids must be non-negative")
    if names is None:
        names = tuple(f"class{j}" for j in range(c))
    return LabelAssignment(n=y.size, labels={i: int(v) for i, v in enumerate(y)}, c=c, names=names)


def load_labels(path, n: int | None = None) -> LabelAssignment:
    """Load labels from lines of "index,label_string".

    Label strings are mapped to dense class ids by first appearance. Duplicate
    indices and (when `n` is given) out-of-range indices are rejected.
    """
    labels: dict[int, int] = {}
    name_to_id: dict[str, int] = {}
    max_index = -1
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            index_str, sep, name = line.partition(",")
            if not sep:
                raise ParseError(f"{path}: line {lineno}: expected 'index,label'")
            try:
                index = int(index_str)
            except ValueError as exc:
                raise ParseError(f"{path}: line {lineno}: bad index {index_str!r}") from exc
            if index < 0:
                raise ValidationError(f"{path}: line {lineno}: negative index {index}")
            if n is not None and index >= n:
                raise ValidationError(
                    f"{path}: line {lineno}: index {index} out of range for n={n}"
                )
            if index in labels:
                raise ValidationError(f"{path}: line {lineno}: duplicate index {index}")
            if name not in name_to_id:
                name_to_id[name] = len(name_to_id)
            labels[index] = name_to_id[name]
            max_index = max(max_index, index)
    size = n if n is not None else max_index + 1
    names = tuple(sorted(name_to_id, key=name_to_id.get))
    return LabelAssignment(n=size, labels=labels, c=len(names), names=names)


def save_labels(path, assignment: LabelAssignment) -> None:
    """Write labels as "index,label_string" lines in node order."""
    with open(path, "w", encoding="utf-8") as fh:
        for node in sorted(assignment.labels):
            fh.write(f"{node},{assignment.names[assignment.labels[node]]}\n")


@dataclass(frozen=True)
class FoldPlan:
    """Deterministic partition of n nodes into near-equal folds."""

    n: int
    num_folds: int
    assignment: np.ndarray
    seed: int

    def fold_nodes(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == fold)

    def complement(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment != fold)


def make_folds(n: int, num_folds: int = 10, seed: int = 0) -> FoldPlan:
    """Shuffle node indices with `seed` and deal them round-robin into folds.

    Fold sizes differ by at most one. Identical (n, num_folds, seed) always
    produce the identical plan.
    """
    n = check_positive_int(n, "n", minimum=2)
    num_folds = check_positive_int(num_folds, "num_folds", minimum=2)
    if n < num_folds:
        raise ConfigError(f"n={n} smaller than num_folds={num_folds}")
    perm = np.random.default_rng(seed).permutation(n)
    assignment = np.empty(n, dtype=np.int64)
    assignment[perm] = np.arange(n) % num_folds
    assignment.setflags(write=False)
    return FoldPlan(n=n, num_folds=num_folds, assignment=assignment, seed=int(seed))


def synth_blobs(
    n: int, c: int, d: int, spread: float, seed: int = 0
) -> tuple[np.ndarray, LabelAssignment]:
    """Generate an isotropic Gaussian blob dataset with round-robin classes.

    Class centers are drawn uniformly in [-1, 1]^d; point i belongs to class
    i % c and equals its center plus N(0, spread^2) noise. Deterministic for
    a fixed seed.
    """
    n = check_positive_int(n, "n", minimum=2)
    c = check_positive_int(c, "c", minimum=1)
    d = check_positive_int(d, "d", minimum=1)
    if n < c:
        raise ConfigError(f"n={n} smaller than class count c={c}")
    if not spread > 0:
        raise ConfigError(f"spread must be > 0, got {spread}")
    rng = np.random.default_rng(seed)
    centers = rng.uniform(-1.0, 1.0, size=(c, d))
    y = np.arange(n, dtype=np.int64) % c
    X = centers[y] + rng.normal(0.0, spread, size=(n, d))
    return X, labels_from_array(y)
