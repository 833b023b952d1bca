"""Input validation helpers shared by the estimator and the functional API."""

from __future__ import annotations

import numpy as np

from .errors import ConfigError, ValidationError


def check_features(X, name: str = "X") -> np.ndarray:
    """Coerce to a C-contiguous float64 matrix and enforce feature invariants.

    Requires a 2-D array with at least 2 rows, at least 1 column, and only
    finite values. Returns the validated array (a copy when coercion was
    needed).
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValidationError(f"{name} must be 2-D, got ndim={X.ndim}")
    n, d = X.shape
    if n < 2:
        raise ValidationError(f"{name} needs at least 2 rows, got {n}")
    if d < 1:
        raise ValidationError(f"{name} needs at least 1 column, got {d}")
    if not np.all(np.isfinite(X)):
        i, j = np.argwhere(~np.isfinite(X))[0]
        raise ValidationError(f"non-finite value in {name} at row {i}, column {j}")
    return X


def check_node_indices(nodes, n: int, name: str = "nodes") -> np.ndarray:
    """Coerce to a sorted, duplicate-free int64 index array into {0..n-1}."""
    nodes = np.asarray(nodes, dtype=np.int64).ravel()
    if nodes.size == 0:
        return nodes
    if nodes.min() < 0 or nodes.max() >= n:
        raise ValidationError(f"{name} contains indices outside 0..{n - 1}")
    out = np.unique(nodes)
    if out.size != nodes.size:
        raise ValidationError(f"{name} contains duplicate indices")
    return out


def check_positive_int(value, name: str, minimum: int = 1) -> int:
    value = int(value)
    if value < minimum:
        raise ConfigError(f"{name} must be >= {minimum}, got {value}")
    return value


def check_open_unit(value, name: str) -> float:
    value = float(value)
    if not (0.0 < value < 1.0):
        raise ConfigError(f"{name} must lie in (0, 1), got {value}")
    return value
