"""Graph construction, clustering, network scorers and their training."""

from .graph import (
    ClusterPartition,
    StateGraph,
    build_state_graph,
    cut_edges,
    normalize_adjacency,
    partition_graph,
)
from .models import (
    GatedModel,
    GcnModel,
    gated_forward,
    gcn_forward,
    load_model,
    model_from_json,
    model_to_json,
    new_gated_model,
    new_gcn_model,
    restrict_graph,
    save_model,
    score_placements,
)
from .training import (
    TrainConfig,
    TrainSample,
    gradient_check,
    loss_trace_to_csv,
    train,
)

__all__ = [
    "ClusterPartition",
    "StateGraph",
    "build_state_graph",
    "cut_edges",
    "normalize_adjacency",
    "partition_graph",
    "GatedModel",
    "GcnModel",
    "gated_forward",
    "gcn_forward",
    "load_model",
    "model_from_json",
    "model_to_json",
    "new_gated_model",
    "new_gcn_model",
    "restrict_graph",
    "save_model",
    "score_placements",
    "TrainConfig",
    "TrainSample",
    "gradient_check",
    "loss_trace_to_csv",
    "train",
]
