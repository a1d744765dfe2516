"""Brute-force reference evaluator.

Materializes every pairwise projected gap, sorts them and averages the
smallest ``B``.  Quadratic in N by design; it is the ground truth the fast
kernel is checked against.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset_io import as_matrix

DEFAULT_NAIVE_CAP = 2000


class NaiveCapExceeded(RuntimeError):
    pass


def selection_count(N: int, b_percent: float) -> int:
    """Number of selected pairs, floor(b% of N choose 2)."""
    total = N * (N - 1) // 2
    return int(np.floor(b_percent * total / 100.0))


def checked_selection_count(N: int, b_percent: float) -> int:
    B = selection_count(N, b_percent)
    if B < 1:
        raise ValueError(
            f"b={b_percent}% of {N * (N - 1) // 2} pairs selects nothing; increase b or N"
        )
    return B


@dataclass(frozen=True)
class PairSelection:
    B: int
    left: np.ndarray   # i of each selected pair, i < j in original indexing
    right: np.ndarray  # j of each selected pair
    distances: np.ndarray
    mu: float

    @property
    def selected_pairs(self) -> list[tuple[int, int]]:
        return list(zip(self.left.tolist(), self.right.tolist()))


def pairwise_gaps(p: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    i, j = np.triu_indices(len(p), k=1)
    return i, j, np.abs(p[i] - p[j])


def select_pairs(p: np.ndarray, b_percent: float) -> PairSelection:
    p = np.asarray(p, dtype=np.float64)
    B = checked_selection_count(len(p), b_percent)
    i, j, d = pairwise_gaps(p)
    # triu order is already (i, j) lexicographic, so a stable sort on d
    # realizes the (distance, i, j) tie policy
    keep = np.argsort(d, kind="stable")[:B]
    dist = d[keep]
    return PairSelection(B=B, left=i[keep], right=j[keep], distances=dist, mu=float(dist.mean()))


def mu_b_naive(x_c, w, b_percent: float) -> PairSelection:
    x = as_matrix(x_c)
    return select_pairs(x @ np.asarray(w, dtype=np.float64), b_percent)


def penalty_value(w, prev_axes, alpha: float) -> float:
    if len(prev_axes) == 0:
        return 0.0
    dots = np.asarray(prev_axes) @ w
    return float(alpha * np.dot(dots, dots))


def objective_naive(x_c, w, prev_axes, b_percent: float, alpha: float) -> float:
    w = np.asarray(w, dtype=np.float64)
    return mu_b_naive(x_c, w, b_percent).mu - penalty_value(w, prev_axes, alpha)


def gradient_naive(x_c, w, selection: PairSelection) -> np.ndarray:
    """(1/B) sum over selected pairs of sign(p_j - p_i) (x_j - x_i).

    Zero gaps count with sign +1 so that the later index is the right
    endpoint, matching a stable sort of the projections.
    """
    x = as_matrix(x_c)
    p = x @ np.asarray(w, dtype=np.float64)
    sgn = np.where(p[selection.right] >= p[selection.left], 1.0, -1.0)
    N = x.shape[0]
    c = np.bincount(selection.right, weights=sgn, minlength=N) - np.bincount(
        selection.left, weights=sgn, minlength=N
    )
    return x.T @ c / selection.B


def fit_naive(ds, config, *, cap: int = DEFAULT_NAIVE_CAP, force: bool = False, **kwargs):
    """Fit with the brute-force evaluator.  Refuses N > ``cap`` unless ``force``."""
    from .optimizer import fit

    N = as_matrix(ds).shape[0]
    if N > cap and not force:
        raise NaiveCapExceeded(
            f"naive engine refuses N={N} > cap {cap}; pass --force-naive (force=True) to override"
        )
    return fit(ds, config, engine="naive", **kwargs)
