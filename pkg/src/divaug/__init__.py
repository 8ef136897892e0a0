"""Diversity-maximising data augmentation (expand, score, select, train)."""
from .imageops import OpKind, Operation, apply_op, apply_transform, default_augment
from .kernels import BACKEND
from .oracle import OracleModel, ce_hessian, ce_loss, predict_proba, sgd_step, taylor_residual
from .pipeline import RunConfig, train_with_divaug
from .policy import CandidateSet, SubPolicy, apply_subpolicy, expand, sample_subpolicy
from .selection import SelectionResult, brute_force_max_variance, kmeanspp_select, variance_diversity

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "CandidateSet", "OpKind", "Operation", "OracleModel", "RunConfig",
    "SelectionResult", "SubPolicy", "apply_op", "apply_subpolicy", "apply_transform",
    "brute_force_max_variance", "ce_hessian", "ce_loss", "default_augment", "expand",
    "kmeanspp_select", "predict_proba", "sample_subpolicy", "sgd_step", "taylor_residual",
    "train_with_divaug", "variance_diversity",
]
