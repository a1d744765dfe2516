"""Seeded synthetic datasets for checks and benchmarks."""

from __future__ import annotations

import numpy as np


def gaussian_mixture(
    N: int,
    n: int,
    clusters: int = 10,
    separation: float = 4.0,
    sigma: float = 1.0,
    seed: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """Isotropic clusters whose centers sit ``separation * sigma`` apart pairwise.

    Centers are scaled simplex vertices ``(separation * sigma / sqrt 2) e_c`` in a
    random rotation.  Returns ``(points, labels)``.
    """
    if clusters > n:
        raise ValueError("need clusters <= n to place equidistant centers")
    rng = np.random.default_rng(seed)
    centers = np.zeros((clusters, n))
    centers[np.arange(clusters), np.arange(clusters)] = separation * sigma / np.sqrt(2.0)
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    centers = centers @ q.T
    labels = rng.integers(0, clusters, size=N)
    points = centers[labels] + sigma * rng.standard_normal((N, n))
    return points, labels


def isotropic(N: int, n: int, seed: int = 0) -> np.ndarray:
    return np.random.default_rng(seed).standard_normal((N, n))


def anisotropic(N: int, variances, seed: int = 0) -> np.ndarray:
    v = np.sqrt(np.asarray(variances, dtype=np.float64))
    return np.random.default_rng(seed).standard_normal((N, len(v))) * v
