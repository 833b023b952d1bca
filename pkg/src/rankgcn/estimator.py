"""scikit-learn style estimator over the rank-graph-GCN pipeline."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import NotFittedError

from .errors import ConfigError, ValidationError
from .gcn import forward, predict, train, TrainConfig
from .graphs import build_normalized_adjacency, knn_edges, reciprocal_edges
from .ranking import compute_ranked_lists
from .rerank import RerankerSpec, rerank
from .validation import check_features


class RankGraphClassifier(BaseEstimator, ClassifierMixin):
    """Transductive semi-supervised classifier on a rank-derived graph.

    The estimator ranks the whole collection by Euclidean distance,
    optionally improves the ranking with an unsupervised re-ranker, builds
    a kNN or reciprocal-kNN graph from the result, and trains a graph
    convolutional model on the labeled subset. Following the scikit-learn
    semi-supervised convention, entries of ``y`` equal to -1 mark unlabeled
    points; predictions cover the fitted collection (transductive).

    Parameters
    ----------
    reranker : {"none", "correlation", "diffusion"}
        Unsupervised re-ranking applied to the ranked lists.
    method_k : int
        Neighborhood size used by the correlation re-ranker.
    rerank_iterations : int
        Iteration count of the correlation re-ranker.
    diffusion_alpha, diffusion_eps, diffusion_max_iter
        Damping, convergence tolerance, and iteration cap of the diffusion
        re-ranker.
    graph : {"knn", "reciprocal"}
        Edge-set construction.
    k : int
        Graph neighborhood size (clamped to n - 1 on tiny collections).
    depth : int or None
        Ranked-list length; None resolves to min(n, 5 * max(k, method_k)).
    backend : {"exact", "ball_tree"}
        Nearest-neighbor backend; both give identical rankings.
    model : {"gcn", "sgc", "appnp"}
        Graph convolutional variant.
    hidden : int
        Hidden width of gcn/appnp.
    sgc_power : int
        Propagation power K of sgc.
    appnp_alpha : float
        Teleport damping of appnp.
    appnp_steps : int
        Propagation step count of appnp.
    epochs : int
        Full-batch training steps.
    learning_rate : float
        Adam learning rate.
    random_state : int
        Seed for weight initialization.

    Attributes
    ----------
    classes_ : ndarray
        Sorted class labels seen among the labeled entries of ``y``.
    transduction_ : ndarray
        Predicted label for every fitted point.
    probabilities_ : ndarray of shape (n, c)
        Row-stochastic class probabilities for every fitted point.
    """

    def __init__(
        self,
        reranker="none",
        method_k=40,
        rerank_iterations=2,
        diffusion_alpha=0.85,
        diffusion_eps=1e-8,
        diffusion_max_iter=1000,
        graph="knn",
        k=40,
        depth=None,
        backend="exact",
        model="gcn",
        hidden=256,
        sgc_power=2,
        appnp_alpha=0.1,
        appnp_steps=10,
        epochs=200,
        learning_rate=1e-5,
        random_state=0,
    ):
        self.reranker = reranker
        self.method_k = method_k
        self.rerank_iterations = rerank_iterations
        self.diffusion_alpha = diffusion_alpha
        self.diffusion_eps = diffusion_eps
        self.diffusion_max_iter = diffusion_max_iter
        self.graph = graph
        self.k = k
        self.depth = depth
        self.backend = backend
        self.model = model
        self.hidden = hidden
        self.sgc_power = sgc_power
        self.appnp_alpha = appnp_alpha
        self.appnp_steps = appnp_steps
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.random_state = random_state

    def _reranker_spec(self) -> RerankerSpec:
        kind = {"none": "identity"}.get(self.reranker, self.reranker)
        return RerankerSpec(
            kind=kind,
            k_method=self.method_k,
            iterations=self.rerank_iterations,
            alpha=self.diffusion_alpha,
            eps=self.diffusion_eps,
            max_iter=self.diffusion_max_iter,
        )

    def fit(self, X, y):
        """Fit on the full collection with -1 marking unlabeled points."""
        X = check_features(X)
        y = np.asarray(y).ravel()
        if y.shape[0] != X.shape[0]:
            raise ValidationError(f"y has {y.shape[0]} entries for {X.shape[0]} rows of X")
        labeled = np.flatnonzero(y != -1)
        if labeled.size == 0:
            raise ConfigError("fit needs at least one labeled point (y != -1)")
        classes, encoded = np.unique(y[labeled], return_inverse=True)
        if classes.size < 2:
            raise ConfigError("fit needs at least two distinct labeled classes")
        from .datasets import LabelAssignment

        assignment = LabelAssignment(
            n=X.shape[0],
            labels={int(i): int(c) for i, c in zip(labeled, encoded)},
            c=int(classes.size),
            names=tuple(str(v) for v in classes),
        )
        n = X.shape[0]
        k = min(int(self.k), n - 1)
        spec = self._reranker_spec()
        depth = self.depth
        if depth is None:
            depth = min(n, 5 * max(k, min(spec.k_method, n - 1) if spec.kind == "correlation" else 1))
        depth = min(int(depth), n)
        lists = compute_ranked_lists(X, depth=depth, backend=self.backend)
        lists = rerank(lists, spec)
        builder = knn_edges if self.graph == "knn" else reciprocal_edges
        if self.graph not in ("knn", "reciprocal"):
            raise ConfigError(f"unknown graph kind {self.graph!r}")
        edges = builder(lists, k)
        A_hat = build_normalized_adjacency(edges)
        params, _ = train(
            self.model,
            X,
            A_hat,
            assignment,
            labeled,
            TrainConfig(
                epochs=self.epochs,
                learning_rate=self.learning_rate,
                seed=self.random_state,
            ),
            hidden=self.hidden,
            sgc_power=self.sgc_power,
            appnp_alpha=self.appnp_alpha,
            appnp_steps=self.appnp_steps,
        )
        Z = forward(params, X, A_hat)
        self.classes_ = classes
        self.params_ = params
        self.probabilities_ = Z
        self.transduction_ = classes[predict(Z)]
        self.n_features_in_ = X.shape[1]
        self._fit_X = X
        return self

    def _check_fitted_X(self, X):
        if not hasattr(self, "transduction_"):
            raise NotFittedError("this RankGraphClassifier instance is not fitted yet")
        if X is not None and not np.array_equal(np.asarray(X, dtype=np.float64), self._fit_X):
            raise ValidationError(
                "transductive classifier: predictions are only defined for the fitted X"
            )

    def predict(self, X=None):
        """Predicted labels of the fitted collection."""
        self._check_fitted_X(X)
        return self.transduction_.copy()

    def predict_proba(self, X=None):
        """Class probabilities of the fitted collection, columns ordered as classes_."""
        self._check_fitted_X(X)
        return self.probabilities_.copy()

    def fit_predict(self, X, y):
        return self.fit(X, y).transduction_.copy()
