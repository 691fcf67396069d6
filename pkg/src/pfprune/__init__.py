"""Structured CNN filter pruning without data.

Importance criteria (operator-norm, entry-wise norms, geometric median,
feature-map rank and energy), prune-plan creation/application over a layer
DAG, and parameter/MAC cost accounting.
"""

__version__ = "0.1.0"

from .container import Model, load_model, save_model
from .cost import CostReport, compare, cost_report, count_macs, count_params
from .fixtures import build_fixture
from .graph import LayerNode, NetworkGraph, PruneGroup, discover_groups, infer_shapes
from .importance import (
    DirectionBank,
    ImportanceReport,
    direction_bank,
    score_energy,
    score_entrywise,
    score_gm,
    score_hrank,
    score_layer,
    score_operator_norm,
)
from .linalg import (
    KernelTensor,
    Rank1Factors,
    entrywise_norm,
    operator_norm,
    svd_rank1,
    trace_product,
)
from .pruner import PrunePlan, apply_plan, make_plan, verify_equivalence

__all__ = [
    "__version__",
    "Model", "load_model", "save_model",
    "CostReport", "compare", "cost_report", "count_macs", "count_params",
    "build_fixture",
    "LayerNode", "NetworkGraph", "PruneGroup", "discover_groups", "infer_shapes",
    "DirectionBank", "ImportanceReport", "direction_bank",
    "score_energy", "score_entrywise", "score_gm", "score_hrank",
    "score_layer", "score_operator_norm",
    "KernelTensor", "Rank1Factors", "entrywise_norm", "operator_norm",
    "svd_rank1", "trace_product",
    "PrunePlan", "apply_plan", "make_plan", "verify_equivalence",
]
