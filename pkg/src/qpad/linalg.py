"""Centering, projection and the fitted-model container."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .dataset_io import Dataset, as_matrix

MODEL_MAGIC = "QPADv1"
UNIT_TOL = 1e-12


@dataclass(frozen=True)
class QpadConfig:
    """Hyperparameters for fitting.

    ``b_percent`` is the share (in percent) of the smallest pairwise projected
    gaps that enter each axis objective; ``alpha`` weighs the soft
    orthogonality penalty.  ``grad_tol`` is relative to the data radius.
    """

    m: int
    b_percent: float = 70.0
    alpha: float = 1.0
    max_iters_per_axis: int = 100
    grad_tol: float = 1e-6
    seed: int = 0
    restarts_per_axis: int = 3

    def __post_init__(self):
        if self.m < 1:
            raise ValueError(f"m must be >= 1, got {self.m}")
        if not 0 < self.b_percent <= 100:
            raise ValueError(f"b_percent must lie in (0, 100], got {self.b_percent}")
        if self.alpha < 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if self.max_iters_per_axis < 1:
            raise ValueError("max_iters_per_axis must be >= 1")
        if self.restarts_per_axis < 1:
            raise ValueError("restarts_per_axis must be >= 1")
        if self.grad_tol < 0:
            raise ValueError("grad_tol must be >= 0")


@dataclass(frozen=True)
class ProjectionModel:
    directions: np.ndarray
    mean: np.ndarray
    config_echo: dict = field(default_factory=dict)
    unit_rows: bool = True

    def __post_init__(self):
        d = np.array(self.directions, dtype=np.float64)
        mu = np.array(self.mean, dtype=np.float64)
        if d.ndim != 2 or mu.shape != (d.shape[1],):
            raise ValueError(f"directions {d.shape} and mean {mu.shape} disagree")
        if d.shape[0] > d.shape[1]:
            raise ValueError(f"m={d.shape[0]} exceeds n={d.shape[1]}")
        if not np.all(np.isfinite(mu)) or not np.all(np.isfinite(d)):
            raise ValueError("model contains non-finite values")
        if self.unit_rows:
            err = np.abs(np.linalg.norm(d, axis=1) - 1.0)
            if err.max() > UNIT_TOL:
                raise ValueError(f"direction rows deviate from unit norm by {err.max():.3g}")
        d.flags.writeable = False
        mu.flags.writeable = False
        object.__setattr__(self, "directions", d)
        object.__setattr__(self, "mean", mu)

    @property
    def m(self) -> int:
        return self.directions.shape[0]

    @property
    def n(self) -> int:
        return self.directions.shape[1]


def center(ds) -> tuple[Dataset, np.ndarray]:
    x = as_matrix(ds)
    mean = x.mean(axis=0)
    return Dataset(x - mean, min_rows=1), mean


def project_scalar(x_c, w) -> np.ndarray:
    x = as_matrix(x_c)
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (x.shape[1],):
        raise ValueError(f"direction has shape {w.shape}, data has {x.shape[1]} columns")
    return x @ w


def transform(model: ProjectionModel, ds) -> np.ndarray:
    x = as_matrix(ds)
    if x.shape[1] != model.n:
        raise ValueError(f"model expects {model.n} columns, data has {x.shape[1]}")
    return (x - model.mean) @ model.directions.T


def unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    return v / np.linalg.norm(v)


def save_model(model: ProjectionModel, path) -> None:
    """Write the model as a ``QPADv1`` magic line followed by a JSON body."""
    body = {
        "m": model.m,
        "n": model.n,
        "unit_rows": model.unit_rows,
        "mean": [float(v) for v in model.mean],
        "directions": [float(v) for v in model.directions.ravel()],
        "config": model.config_echo,
    }
    text = MODEL_MAGIC + "\n" + json.dumps(body, sort_keys=True) + "\n"
    Path(path).write_text(text)


def load_model(path) -> ProjectionModel:
    text = Path(path).read_text()
    magic, _, rest = text.partition("\n")
    if magic != MODEL_MAGIC:
        raise ValueError(f"{path}: not a {MODEL_MAGIC} model file")
    body = json.loads(rest)
    m, n = int(body["m"]), int(body["n"])
    return ProjectionModel(
        directions=np.array(body["directions"], dtype=np.float64).reshape(m, n),
        mean=np.array(body["mean"], dtype=np.float64),
        config_echo=body.get("config", {}),
        unit_rows=bool(body.get("unit_rows", True)),
    )


def config_dict(config: QpadConfig, **extra) -> dict:
    out = asdict(config)
    out.update(extra)
    return out
