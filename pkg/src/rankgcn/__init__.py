"""Rank-based graph construction and GCN training for semi-supervised
classification of precomputed feature collections."""

from .datasets import (
    FoldPlan,
    LabelAssignment,
    labels_from_array,
    load_features,
    load_labels,
    make_folds,
    save_features,
    save_labels,
    synth_blobs,
)
from .errors import (
    ConfigError,
    DivergenceError,
    ParseError,
    RankGCNError,
    ValidationError,
)
from .estimator import RankGraphClassifier
from .gcn import (
    ModelParams,
    TrainConfig,
    appnp_forward,
    forward,
    gcn_forward,
    init_params,
    load_params,
    loss_and_gradients,
    masked_cross_entropy,
    predict,
    save_history,
    save_params,
    sgc_forward,
    train,
)
from .graphs import (
    EdgeSet,
    build_normalized_adjacency,
    knn_edges,
    load_edges,
    neighborhoods,
    reciprocal_edges,
    save_adjacency,
    save_edges,
)
from .metrics import accuracy, edge_purity, neighbor_purity, weighted_f_measure
from .protocol import (
    PipelineConfig,
    RunReport,
    StageTimings,
    mix_seed,
    run_protocol,
    time_stage,
)
from .ranking import (
    RankedLists,
    compute_ranked_lists,
    load_ranked_lists,
    rank_of,
    save_ranked_lists,
)
from .rerank import (
    RerankerSpec,
    rank_affinity,
    rerank,
    rerank_correlation,
    rerank_diffusion,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DivergenceError",
    "EdgeSet",
    "FoldPlan",
    "LabelAssignment",
    "ModelParams",
    "ParseError",
    "PipelineConfig",
    "RankGCNError",
    "RankGraphClassifier",
    "RankedLists",
    "RerankerSpec",
    "RunReport",
    "StageTimings",
    "TrainConfig",
    "ValidationError",
    "accuracy",
    "appnp_forward",
    "build_normalized_adjacency",
    "compute_ranked_lists",
    "edge_purity",
    "forward",
    "gcn_forward",
    "init_params",
    "knn_edges",
    "labels_from_array",
    "load_edges",
    "load_features",
    "load_labels",
    "load_params",
    "load_ranked_lists",
    "loss_and_gradients",
    "make_folds",
    "masked_cross_entropy",
    "mix_seed",
    "neighbor_purity",
    "neighborhoods",
    "predict",
    "rank_affinity",
    "rank_of",
    "reciprocal_edges",
    "rerank",
    "rerank_correlation",
    "rerank_diffusion",
    "run_protocol",
    "save_adjacency",
    "save_edges",
    "save_features",
    "save_history",
    "save_labels",
    "save_params",
    "save_ranked_lists",
    "sgc_forward",
    "synth_blobs",
    "time_stage",
    "train",
    "weighted_f_measure",
]
