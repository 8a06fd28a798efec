"""Node-collaboration-informed graph convolution for missing-weight estimation."""
from .graph import (
    EdgeList,
    EdgeSplit,
    MatrixMarketError,
    NormalizedAdjacency,
    SelfLoopWarning,
    UndirectedWeightedGraph,
    build_normalized_adjacency,
    normalize_weights,
    parse_matrix_market,
    read_graph,
    split_edges,
)
from .metrics import MetricPair, rmse_mae
from .model import (
    ForwardTrace,
    NgcnGradients,
    NgcnParams,
    batch_gradients,
    batch_loss,
    collab_score,
    forward,
    init_params,
    predict_edge,
    predict_edges,
)
from .stats import friedman_mean_ranks, wilcoxon_signed_rank
from .trainer import AdamState, RunReport, TrainConfig, TrainingError, adam_step, grid_search, train

__version__ = "0.1.0"
