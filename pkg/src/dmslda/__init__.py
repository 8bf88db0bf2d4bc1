"""Sparse multicategory linear discriminant analysis, centralized and distributed."""

from .classifier import ReducedLdaModel, fit_reduced_lda, predict, predict_batch
from .core import ClassSummaries, LabeledDataset, QuadraticProblem, SolveReport
from .csl import GridConfig, run_dmslda
from .oracle import fisher_subspace, oracle_discriminant, principal_angles
from .solver import SolverConfig, fista_solve, lipschitz_upper_bound, soft_threshold
from .summaries import average_summaries, compute_class_summaries, local_gradient, local_loss

__version__ = "0.1.0"

__all__ = [
    "ClassSummaries",
    "GridConfig",
    "LabeledDataset",
    "QuadraticProblem",
    "ReducedLdaModel",
    "SolveReport",
    "SolverConfig",
    "average_summaries",
    "compute_class_summaries",
    "fisher_subspace",
    "fista_solve",
    "fit_reduced_lda",
    "lipschitz_upper_bound",
    "local_gradient",
    "local_loss",
    "oracle_discriminant",
    "predict",
    "predict_batch",
    "principal_angles",
    "run_dmslda",
    "soft_threshold",
]
