"""Sphere-constrained ascent for each projection axis and the m-axis fit loop.

Each axis maximizes ``phi(w) = mu_b(w) - alpha * sum_j (w_j . w)^2`` over unit
vectors.  Steps follow the tangent-projected gradient, are retracted back to
the sphere by renormalization, and are accepted only under an Armijo
sufficient-increase test, so accepted iterates never decrease ``phi``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, NamedTuple, Sequence

import numpy as np

from . import fast, naive
from .dataset_io import as_matrix, write_table
from .linalg import ProjectionModel, QpadConfig, center, config_dict, unit

logger = logging.getLogger(__name__)

ENGINES = ("fast", "naive")
ARMIJO = 1e-4
MIN_STEP = 1e-14
MAX_STEP = 1.0
FIRST_STEP = 0.25


class AxisInfo(NamedTuple):
    mu: float
    delta_star: float
    R: int
    B: int


@dataclass
class AxisFitTrace:
    # (phi, tangent-gradient norm, accepted step length) per accepted iterate;
    # the first row is the starting point with step 0
    iterations: list[tuple[float, float, float]] = field(default_factory=list)
    evals: list[AxisInfo] = field(default_factory=list)
    converged: bool = False
    restarts_used: int = 0
    stop_reason: str = ""

    @property
    def final_phi(self) -> float:
        return self.iterations[-1][0]

    @property
    def final_grad_norm(self) -> float:
        return self.iterations[-1][1]


def penalty(w, prev_axes: Sequence[np.ndarray], alpha: float) -> tuple[float, np.ndarray]:
    """Penalty value and the gradient of its negative (to be added to grad mu)."""
    w = np.asarray(w, dtype=np.float64)
    if len(prev_axes) == 0:
        return 0.0, np.zeros_like(w)
    W = np.asarray(prev_axes, dtype=np.float64)
    dots = W @ w
    return float(alpha * dots @ dots), -2.0 * alpha * (dots @ W)


def tangent_project(g, w) -> np.ndarray:
    g = np.asarray(g, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    return g - (w @ g) * w


def make_objective(x_c: np.ndarray, prev_axes, b_percent: float, alpha: float, engine: str):
    """Return ``f(w) -> (phi, full gradient, AxisInfo)`` for the chosen engine."""
    if engine not in ENGINES:
        raise ValueError(f"engine must be one of {ENGINES}, got {engine!r}")
    prev = [np.asarray(a, dtype=np.float64) for a in prev_axes]

    if engine == "fast":
        B = naive.checked_selection_count(x_c.shape[0], b_percent)

        def mu_and_grad(w):
            ev = fast.evaluate_sorted(fast.sort_projection(x_c @ w), B)
            return ev.mu, fast.gradient_mu(x_c, ev), AxisInfo(ev.mu, ev.delta_star, ev.R, ev.B)
    else:
        def mu_and_grad(w):
            sel = naive.mu_b_naive(x_c, w, b_percent)
            d = sel.distances[-1]
            R = int(np.count_nonzero(sel.distances == d))
            return sel.mu, naive.gradient_naive(x_c, w, sel), AxisInfo(sel.mu, float(d), R, sel.B)

    def objective(w):
        mu, g_mu, info = mu_and_grad(w)
        pen, g_pen = penalty(w, prev, alpha)
        return mu - pen, g_mu + g_pen, info

    return objective


def ascend(
    objective: Callable,
    w0: np.ndarray,
    max_iters: int,
    grad_tol: float,
) -> tuple[np.ndarray, AxisFitTrace]:
    """Projected gradient ascent with backtracking from ``w0``."""
    w = unit(w0)
    phi, g, info = objective(w)
    gt = tangent_project(g, w)
    gn = float(np.linalg.norm(gt))
    trace = AxisFitTrace(iterations=[(phi, gn, 0.0)], evals=[info])
    step = FIRST_STEP
    for _ in range(max_iters):
        if gn <= grad_tol:
            trace.converged = True
            trace.stop_reason = "grad_tol"
            return w, trace
        s = min(2.0 * step, MAX_STEP)
        direction = gt / gn
        while s >= MIN_STEP:
            w_new = unit(w + s * direction)
            phi_new, g_new, info_new = objective(w_new)
            if phi_new >= phi + ARMIJO * s * gn:
                break
            s *= 0.5
        else:
            trace.stop_reason = "line_search"
            return w, trace
        w, phi, g, info, step = w_new, phi_new, g_new, info_new, s
        gt = tangent_project(g, w)
        gn = float(np.linalg.norm(gt))
        trace.iterations.append((phi, gn, s))
        trace.evals.append(info)
    if gn <= grad_tol:
        trace.converged = True
        trace.stop_reason = "grad_tol"
    else:
        trace.stop_reason = "max_iters"
    return w, trace


def data_scale(x_c: np.ndarray) -> float:
    """Largest distance from the centroid; within a factor 2 of the diameter."""
    r = float(np.sqrt(np.max(np.einsum("ij,ij->i", x_c, x_c))))
    return r if r > 0 else 1.0


def optimize_axis(
    x_c,
    prev_axes,
    config: QpadConfig,
    rng: np.random.Generator,
    engine: str = "fast",
    grad_tol_abs: float | None = None,
) -> tuple[np.ndarray, AxisFitTrace]:
    """Best of ``config.restarts_per_axis`` ascents from random unit starts."""
    x = as_matrix(x_c)
    if grad_tol_abs is None:
        grad_tol_abs = config.grad_tol * data_scale(x)
    objective = make_objective(x, prev_axes, config.b_percent, config.alpha, engine)
    starts = [rng.standard_normal(x.shape[1]) for _ in range(config.restarts_per_axis)]
    best = None
    for start in starts:
        w, trace = ascend(objective, start, config.max_iters_per_axis, grad_tol_abs)
        # strict > keeps the earliest restart on ties
        if best is None or trace.final_phi > best[1].final_phi:
            best = (w, trace)
    w, trace = best
    trace.restarts_used = len(starts)
    return w, trace


def fit(ds, config: QpadConfig, engine: str = "fast") -> tuple[ProjectionModel, list[AxisFitTrace]]:
    """Fit ``config.m`` axes sequentially on centered data."""
    x = as_matrix(ds)
    if config.m > x.shape[1]:
        raise ValueError(f"m={config.m} exceeds the data dimension n={x.shape[1]}")
    x_c, mean = center(x)
    x_c = x_c.vectors
    tol = config.grad_tol * data_scale(x_c)
    rng = np.random.default_rng(config.seed)
    axes: list[np.ndarray] = []
    traces: list[AxisFitTrace] = []
    for k in range(config.m):
        w, trace = optimize_axis(x_c, axes, config, rng, engine, grad_tol_abs=tol)
        logger.info(
            "axis %d: phi=%.6g |g_t|=%.3g iters=%d stop=%s",
            k, trace.final_phi, trace.final_grad_norm, len(trace.iterations) - 1, trace.stop_reason,
        )
        axes.append(w)
        traces.append(trace)
    model = ProjectionModel(np.array(axes), mean, config_echo=config_dict(config, engine=engine))
    return model, traces


def write_trace(trace: AxisFitTrace, path) -> None:
    rows = [(t, phi, gn, step) for t, (phi, gn, step) in enumerate(trace.iterations)]
    write_table(path, ("iter", "phi", "grad_norm", "step"), rows)


def write_traces(traces: Sequence[AxisFitTrace], directory) -> list[Path]:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for k, trace in enumerate(traces):
        p = out / f"axis_{k:03d}.csv"
        write_trace(trace, p)
        paths.append(p)
    return paths


def write_axis_dump(traces: Sequence[AxisFitTrace], path) -> None:
    rows = [
        (k, t, ev.delta_star, ev.R, ev.B, ev.mu)
        for k, trace in enumerate(traces)
        for t, ev in enumerate(trace.evals)
    ]
    write_table(path, ("axis", "iter", "delta_star", "R", "B", "mu"), rows)
