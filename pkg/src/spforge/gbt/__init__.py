"""Gradient-boosted multiclass classifier built from scratch."""

from .model import (
    GbtModel,
    TrainConfig,
    TrainReport,
    load_model,
    model_from_dict,
    model_to_dict,
    predict_class,
    predict_scores,
    save_model,
    train,
)
from .objective import grad_hess, grad_hess_matrix, log_loss, softmax
from .tree import Split, TreeNode, best_split, grow_tree, leaf_weight, tree_depth, tree_predict

__all__ = [
    "GbtModel",
    "Split",
    "TrainConfig",
    "TrainReport",
    "TreeNode",
    "best_split",
    "grad_hess",
    "grad_hess_matrix",
    "grow_tree",
    "leaf_weight",
    "load_model",
    "log_loss",
    "model_from_dict",
    "model_to_dict",
    "predict_class",
    "predict_scores",
    "save_model",
    "softmax",
    "train",
    "tree_depth",
    "tree_predict",
]
