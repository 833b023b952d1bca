"""Graph convolutional classifiers with hand-derived analytic gradients.

Three variants share the normalized adjacency operator A_hat:

- ``gcn``:   Z = softmax(A_hat relu(A_hat X W0) W1), the two-layer model.
- ``sgc``:   Z = softmax(A_hat^K X W), nonlinearities removed and the layer
             weights collapsed into a single matrix.
- ``appnp``: logits relu(X W0) W1 propagated by a damped personalized-
             PageRank recurrence before the softmax.

Training minimizes the mean cross-entropy of the labeled nodes, computed
from logits through log-sum-exp, with full-batch Adam updates. All
arithmetic is float64; gradients are exact derivatives of the forward
passes (A_hat is symmetric, which the backward passes rely on).
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .datasets import LabelAssignment, _read_fmat, _write_fmat
from .errors import ConfigError, DivergenceError, ValidationError
from .validation import check_features, check_node_indices, check_open_unit, check_positive_int

VARIANTS = ("gcn", "sgc", "appnp")

# Densify tiny or near-dense operators; sparse products win decisively on
# the low-degree graphs this pipeline builds.
_DENSE_MAX_N = 128
_DENSE_MIN_DENSITY = 0.25


@dataclass
class TrainConfig:
    """Optimization constants; epochs and learning rate carry the defaults
    of the evaluation protocol."""

    epochs: int = 200
    learning_rate: float = 1e-5
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    record_history: bool = False


@dataclass
class ModelParams:
    """Trainable weights plus the per-variant hyperparameters."""

    variant: str
    weights: dict[str, np.ndarray]
    hidden: int | None = None
    sgc_power: int = 2
    appnp_alpha: float = 0.1
    appnp_steps: int = 10

    def weight_names(self) -> tuple[str, ...]:
        return ("W",) if self.variant == "sgc" else ("W0", "W1")


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def init_params(
    variant: str,
    d: int,
    c: int,
    hidden: int = 256,
    seed: int = 0,
    sgc_power: int = 2,
    appnp_alpha: float = 0.1,
    appnp_steps: int = 10,
) -> ModelParams:
    """Glorot-uniform initialized parameters, deterministic per seed."""
    if variant not in VARIANTS:
        raise ConfigError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    check_positive_int(d, "d")
    check_positive_int(c, "c")
    rng = np.random.default_rng(seed)
    if variant == "sgc":
        if sgc_power < 0:
            raise ConfigError(f"sgc_power must be >= 0, got {sgc_power}")
        return ModelParams(
            variant=variant,
            weights={"W": _glorot(rng, d, c)},
            hidden=None,
            sgc_power=int(sgc_power),
        )
    check_positive_int(hidden, "hidden")
    weights = {"W0": _glorot(rng, d, hidden), "W1": _glorot(rng, hidden, c)}
    if variant == "appnp":
        check_open_unit(appnp_alpha, "appnp_alpha")
        if appnp_steps < 0:
            raise ConfigError(f"appnp_steps must be >= 0, got {appnp_steps}")
        return ModelParams(
            variant=variant,
            weights=weights,
            hidden=int(hidden),
            appnp_alpha=float(appnp_alpha),
            appnp_steps=int(appnp_steps),
        )
    return ModelParams(variant=variant, weights=weights, hidden=int(hidden))


def _row_softmax(U: np.ndarray) -> np.ndarray:
    shifted = U - U.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _row_logsumexp(U: np.ndarray) -> np.ndarray:
    m = U.max(axis=1)
    return m + np.log(np.exp(U - m[:, None]).sum(axis=1))


def _as_operator(A_hat, n: int):
    """Accept a scipy sparse or dense operator; densify small instances."""
    if sp.issparse(A_hat):
        if A_hat.shape != (n, n):
            raise ConfigError(f"adjacency shape {A_hat.shape} does not match n={n}")
        A = A_hat.tocsr()
        if n <= _DENSE_MAX_N or A.nnz > _DENSE_MIN_DENSITY * n * n:
            return A.toarray()
        return A
    A = np.asarray(A_hat, dtype=np.float64)
    if A.shape != (n, n):
        raise ConfigError(f"adjacency shape {A.shape} does not match n={n}")
    return A


def _check_weight_shapes(params: ModelParams, d: int) -> None:
    if params.variant == "sgc":
        if params.weights["W"].shape[0] != d:
            raise ConfigError(
                f"W expects {params.weights['W'].shape[0]} input features, data has {d}"
            )
        return
    W0, W1 = params.weights["W0"], params.weights["W1"]
    if W0.shape[0] != d:
        raise ConfigError(f"W0 expects {W0.shape[0]} input features, data has {d}")
    if W0.shape[1] != W1.shape[0]:
        raise ConfigError(f"W0/W1 hidden sizes disagree: {W0.shape[1]} vs {W1.shape[0]}")


def _gcn_logits(X, A, W0, W1):
    AX = A @ X
    S = AX @ W0
    H = np.maximum(S, 0.0)
    AH = A @ H
    return AH @ W1


def _sgc_propagate(X, A, power: int) -> np.ndarray:
    out = X
    for _ in range(power):
        out = A @ out
    return out


def _appnp_propagate(seed_logits, A, alpha: float, steps: int) -> np.ndarray:
    Z = seed_logits
    for _ in range(steps):
        Z = (1.0 - alpha) * (A @ Z) + alpha * seed_logits
    return Z


def _logits(params: ModelParams, X, A) -> np.ndarray:
    if params.variant == "gcn":
        return _gcn_logits(X, A, params.weights["W0"], params.weights["W1"])
    if params.variant == "sgc":
        return _sgc_propagate(X, A, params.sgc_power) @ params.weights["W"]
    H = np.maximum(X @ params.weights["W0"], 0.0)
    return _appnp_propagate(H @ params.weights["W1"], A, params.appnp_alpha, params.appnp_steps)


def forward(params: ModelParams, X, A_hat) -> np.ndarray:
    """Row-stochastic class probabilities for every node."""
    X = check_features(X)
    _check_weight_shapes(params, X.shape[1])
    A = _as_operator(A_hat, X.shape[0])
    return _row_softmax(_logits(params, X, A))


def gcn_forward(X, A_hat, params: ModelParams) -> np.ndarray:
    """softmax(A_hat relu(A_hat X W0) W1)."""
    if params.variant != "gcn":
        raise ConfigError(f"expected gcn params, got {params.variant!r}")
    return forward(params, X, A_hat)


def sgc_forward(X, A_hat, params: ModelParams) -> np.ndarray:
    """softmax(A_hat^K X W) with K successive propagation products."""
    if params.variant != "sgc":
        raise ConfigError(f"expected sgc params, got {params.variant!r}")
    return forward(params, X, A_hat)


def appnp_forward(X, A_hat, params: ModelParams) -> np.ndarray:
    """softmax of relu(X W0) W1 after damped PageRank-style propagation."""
    if params.variant != "appnp":
        raise ConfigError(f"expected appnp params, got {params.variant!r}")
    return forward(params, X, A_hat)


def predict(Z) -> np.ndarray:
    """Per-row argmax; ties resolve to the lowest class id."""
    Z = np.asarray(Z, dtype=np.float64)
    if Z.ndim != 2:
        raise ValidationError("probability matrix must be 2-D")
    return np.argmax(Z, axis=1).astype(np.int64)


def masked_cross_entropy(Z, labels: LabelAssignment, train_mask, from_logits: bool = False) -> float:
    """Mean negative log-probability of the true class over masked nodes.

    With `from_logits=True` the input rows are unnormalized logits and the
    loss is evaluated through log-sum-exp; this is the numerically stable
    path the training loop uses.
    """
    Z = np.asarray(Z, dtype=np.float64)
    mask = check_node_indices(train_mask, Z.shape[0], name="train_mask")
    if mask.size == 0:
        raise ConfigError("train_mask must contain at least one node")
    try:
        y = np.asarray([labels.labels[int(i)] for i in mask], dtype=np.int64)
    except KeyError as exc:
        raise ValidationError(f"train_mask node {exc} has no label") from exc
    rows = Z[mask]
    picked = rows[np.arange(mask.size), y]
    if from_logits:
        return float(np.mean(_row_logsumexp(rows) - picked))
    with np.errstate(divide="ignore"):
        return float(np.mean(-np.log(picked)))


def _masked_ce_grad(U, mask, y):
    """Loss and dLoss/dU for the masked cross entropy over logits U."""
    rows = U[mask]
    loss = float(np.mean(_row_logsumexp(rows) - rows[np.arange(mask.size), y]))
    G = _row_softmax(rows)
    G[np.arange(mask.size), y] -= 1.0
    G /= mask.size
    dU = np.zeros_like(U)
    dU[mask] = G
    return loss, dU


def loss_and_gradients(params: ModelParams, X, A, mask, y, precomputed=None):
    """Masked training loss and its gradients with respect to every weight.

    `precomputed` may carry per-run products that do not change across
    epochs (A_hat X for gcn, A_hat^K X for sgc).
    """
    pre = precomputed if precomputed is not None else _precompute(params, X, A)
    if params.variant == "gcn":
        W0, W1 = params.weights["W0"], params.weights["W1"]
        AX = pre["AX"]
        S = AX @ W0
        H = np.maximum(S, 0.0)
        AH = A @ H
        U = AH @ W1
        loss, dU = _masked_ce_grad(U, mask, y)
        dW1 = AH.T @ dU
        dH = (A @ dU) @ W1.T
        dS = np.where(S > 0, dH, 0.0)
        return loss, {"W0": AX.T @ dS, "W1": dW1}
    if params.variant == "sgc":
        PX = pre["PX"]
        U = PX @ params.weights["W"]
        loss, dU = _masked_ce_grad(U, mask, y)
        return loss, {"W": PX.T @ dU}
    W0, W1 = params.weights["W0"], params.weights["W1"]
    S = X @ W0
    H = np.maximum(S, 0.0)
    seed_logits = H @ W1
    U = _appnp_propagate(seed_logits, A, params.appnp_alpha, params.appnp_steps)
    loss, dU = _masked_ce_grad(U, mask, y)
    # the propagation operator is a symmetric polynomial in A_hat, so its
    # adjoint is evaluated by propagating the upstream gradient the same way
    dseed = _appnp_propagate(dU, A, params.appnp_alpha, params.appnp_steps)
    dW1 = H.T @ dseed
    dH = dseed @ W1.T
    dS = np.where(S > 0, dH, 0.0)
    return loss, {"W0": X.T @ dS, "W1": dW1}


def _precompute(params: ModelParams, X, A):
    if params.variant == "gcn":
        return {"AX": A @ X}
    if params.variant == "sgc":
        return {"PX": _sgc_propagate(X, A, params.sgc_power)}
    return {}


def train(
    variant: str,
    X,
    A_hat,
    labels: LabelAssignment,
    train_mask,
    config: TrainConfig | None = None,
    *,
    hidden: int = 256,
    sgc_power: int = 2,
    appnp_alpha: float = 0.1,
    appnp_steps: int = 10,
) -> tuple[ModelParams, list[float]]:
    """Full-batch Adam training of the chosen variant.

    Weights start from a seeded Glorot-uniform draw; each epoch evaluates
    the masked cross entropy and its analytic gradients once and applies
    one Adam update. Deterministic for fixed inputs and seed. Raises
    DivergenceError when the loss stops being finite.
    """
    config = config if config is not None else TrainConfig()
    X = check_features(X)
    n, d = X.shape
    check_positive_int(config.epochs, "epochs")
    if config.learning_rate < 0:
        raise ConfigError(f"learning_rate must be >= 0, got {config.learning_rate}")
    mask = check_node_indices(train_mask, n, name="train_mask")
    if mask.size == 0:
        raise ConfigError("training requires at least one labeled node")
    try:
        y = np.asarray([labels.labels[int(i)] for i in mask], dtype=np.int64)
    except KeyError as exc:
        raise ValidationError(f"train_mask node {exc} has no label") from exc
    params = init_params(
        variant,
        d,
        labels.c,
        hidden=hidden,
        seed=config.seed,
        sgc_power=sgc_power,
        appnp_alpha=appnp_alpha,
        appnp_steps=appnp_steps,
    )
    A = _as_operator(A_hat, n)
    pre = _precompute(params, X, A)
    adam_m = {k: np.zeros_like(w) for k, w in params.weights.items()}
    adam_v = {k: np.zeros_like(w) for k, w in params.weights.items()}
    history: list[float] = []
    for epoch in range(config.epochs):
        loss, grads = loss_and_gradients(params, X, A, mask, y, precomputed=pre)
        if not np.isfinite(loss):
            raise DivergenceError(f"non-finite training loss at epoch {epoch}")
        if config.record_history:
            history.append(loss)
        t = epoch + 1
        bias1 = 1.0 - config.beta1**t
        bias2 = 1.0 - config.beta2**t
        for name in params.weight_names():
            g = grads[name]
            m = adam_m[name]
            v = adam_v[name]
            m *= config.beta1
            m += (1.0 - config.beta1) * g
            v *= config.beta2
            v += (1.0 - config.beta2) * (g * g)
            step = (m / bias1) / (np.sqrt(v / bias2) + config.adam_eps)
            params.weights[name] -= config.learning_rate * step
    return params, history


def save_params(directory, params: ModelParams) -> None:
    """Write a manifest plus one binary matrix block per weight."""
    os.makedirs(directory, exist_ok=True)
    manifest = {
        "variant": params.variant,
        "hidden": params.hidden,
        "sgc_power": params.sgc_power,
        "appnp_alpha": params.appnp_alpha,
        "appnp_steps": params.appnp_steps,
        "weights": {},
    }
    for name in params.weight_names():
        filename = f"{name}.fmat"
        _write_fmat(os.path.join(directory, filename), params.weights[name])
        manifest["weights"][name] = filename
    with open(os.path.join(directory, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_params(directory) -> ModelParams:
    with open(os.path.join(directory, "manifest.json"), "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    weights = {
        name: _read_fmat(os.path.join(directory, filename))
        for name, filename in manifest["weights"].items()
    }
    return ModelParams(
        variant=manifest["variant"],
        weights=weights,
        hidden=manifest["hidden"],
        sgc_power=manifest["sgc_power"],
        appnp_alpha=manifest["appnp_alpha"],
        appnp_steps=manifest["appnp_steps"],
    )


def save_history(path, history) -> None:
    """Write the loss history as "epoch,loss" CSV rows."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("epoch,loss\n")
        for epoch, loss in enumerate(history):
            fh.write(f"{epoch},{loss!r}\n")
