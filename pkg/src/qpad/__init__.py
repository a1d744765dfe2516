"""Quantile-preserving linear dimension reduction for nearest-neighbor search."""

from .dataset_io import Dataset, SplitSpec, l2_normalize, read_bvecs, read_csv, read_fvecs, split
from .evaluation import exact_knn, random_projection_fit, recall_at_k, run_sweep
from .fast import mu_b_fast
from .linalg import ProjectionModel, QpadConfig, center, load_model, save_model, transform
from .naive import fit_naive, mu_b_naive
from .optimizer import fit

__all__ = [
    "Dataset",
    "SplitSpec",
    "ProjectionModel",
    "QpadConfig",
    "center",
    "exact_knn",
    "fit",
    "fit_naive",
    "l2_normalize",
    "load_model",
    "mu_b_fast",
    "mu_b_naive",
    "random_projection_fit",
    "read_bvecs",
    "read_csv",
    "read_fvecs",
    "recall_at_k",
    "run_sweep",
    "save_model",
    "split",
    "transform",
]
