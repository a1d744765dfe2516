"""Built-in consistency checks run by ``qpad selfcheck``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import fast, naive
from .linalg import QpadConfig, unit
from .optimizer import data_scale, optimize_axis

FD_STEP = 1e-6
FD_TOL = 1e-5
EQ_RTOL = 1e-9


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


def _instance(rng, max_N=200, max_n=12):
    N = int(rng.integers(10, max_N + 1))
    n = int(rng.integers(2, max_n + 1))
    x = rng.standard_normal((N, n))
    x -= x.mean(axis=0)
    w = unit(rng.standard_normal(n))
    b = float(rng.uniform(10, 100))
    return x, w, b


def check_oracle(rng, count: int) -> CheckResult:
    worst = 0.0
    for t in range(count):
        x, w, b = _instance(rng)
        if t % 2:
            x = np.round(x, 1)  # forces tied gaps
        ev = fast.mu_b_fast(x, w, b)
        sel = naive.mu_b_naive(x, w, b)
        err = abs(ev.mu - sel.mu) / max(1.0, sel.mu)
        worst = max(worst, err)
        if err > EQ_RTOL or ev.delta_star != sel.distances[-1]:
            return CheckResult("fast == naive", False, f"instance {t}: mu {ev.mu!r} vs {sel.mu!r}")
    return CheckResult("fast == naive", True, f"{count} instances, worst rel err {worst:.2e}")


def check_gradient(rng, count: int, sabotage: bool = False) -> CheckResult:
    checked = 0
    worst = 0.0
    attempts = 0
    while checked < count and attempts < 50 * count:
        attempts += 1
        x, w, b = _instance(rng, max_N=120)
        ev = fast.mu_b_fast(x, w, b)
        g = fast.gradient_mu(x, ev)
        if sabotage:
            g = -g
        fd = np.empty_like(w)
        stable = True
        for i in range(len(w)):
            e = np.zeros_like(w)
            e[i] = FD_STEP
            hi = fast.mu_b_fast(x, w + e, b)
            lo = fast.mu_b_fast(x, w - e, b)
            if not (np.array_equal(hi.c, ev.c) and np.array_equal(lo.c, ev.c)):
                stable = False
                break
            fd[i] = (hi.mu - lo.mu) / (2 * FD_STEP)
        if not stable:
            continue
        checked += 1
        err = float(np.max(np.abs(fd - g)))
        worst = max(worst, err)
        if err > FD_TOL:
            return CheckResult("gradient vs finite differences", False, f"max abs err {err:.3g}")
    if checked < count:
        return CheckResult("gradient vs finite differences", False, f"only {checked} stable instances")
    return CheckResult("gradient vs finite differences", True, f"{checked} instances, max abs err {worst:.2e}")


def check_ascent(rng, count: int) -> CheckResult:
    for t in range(count):
        x, _, b = _instance(rng, max_N=150, max_n=8)
        prev = [unit(rng.standard_normal(x.shape[1]))]
        cfg = QpadConfig(m=1, b_percent=b, alpha=float(rng.choice([0.0, 1.0, 50.0])), max_iters_per_axis=40, restarts_per_axis=1)
        w, trace = optimize_axis(x, prev, cfg, rng)
        phis = np.array([it[0] for it in trace.iterations])
        if np.any(np.diff(phis) < -1e-12):
            return CheckResult("monotone ascent", False, f"instance {t}: phi decreased")
        if abs(np.linalg.norm(w) - 1.0) > 1e-12:
            return CheckResult("monotone ascent", False, f"instance {t}: |w| drifted")
        if trace.converged and trace.final_grad_norm > cfg.grad_tol * data_scale(x):
            return CheckResult("monotone ascent", False, f"instance {t}: converged above tolerance")
    return CheckResult("monotone ascent", True, f"{count} runs")


def run_selfcheck(quick: bool = False, seed: int = 0, sabotage: bool = False) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    count = 3 if quick else 25
    return [
        check_oracle(rng, count),
        check_gradient(rng, count, sabotage=sabotage),
        check_ascent(rng, count),
    ]
