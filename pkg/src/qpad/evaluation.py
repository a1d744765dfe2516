"""Exact k-NN ground truth, Recall@k, the random-projection baseline and the
parameter sweep runner."""

from __future__ import annotations

import logging
import math
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dataset_io import REPORT_HEADER, Dataset, SplitSpec, as_matrix, split, write_table
from .linalg import ProjectionModel, QpadConfig, transform
from .optimizer import fit

logger = logging.getLogger(__name__)

BASELINES = ("rp", "rp-sparse")
METHODS = ("qpad",) + BASELINES
# caps the n_queries x N distance block held in memory at once
_BLOCK_ENTRIES = 1 << 24


@dataclass(frozen=True)
class NeighborTable:
    ids: np.ndarray        # (d, k) base indices, nearest first
    distances: np.ndarray  # (d, k)

    @property
    def k(self) -> int:
        return self.ids.shape[1]

    def truncate(self, k: int) -> "NeighborTable":
        return NeighborTable(self.ids[:, :k], self.distances[:, :k])


def exact_knn(base, queries, k: int) -> NeighborTable:
    """Brute-force Euclidean k-NN; ties at equal distance go to the lower index."""
    X = as_matrix(base)
    Q = as_matrix(queries)
    N = X.shape[0]
    if Q.shape[1] != X.shape[1]:
        raise ValueError(f"query dimension {Q.shape[1]} != base dimension {X.shape[1]}")
    if not 1 <= k <= N:
        raise ValueError(f"k must lie in [1, {N}], got {k}")
    xn = np.einsum("ij,ij->i", X, X)
    ids = np.empty((Q.shape[0], k), dtype=np.int64)
    dist = np.empty((Q.shape[0], k))
    chunk = max(1, _BLOCK_ENTRIES // max(N, 1))
    for lo in range(0, Q.shape[0], chunk):
        q = Q[lo:lo + chunk]
        qn = np.einsum("ij,ij->i", q, q)
        d2 = qn[:, None] + xn[None, :] - 2.0 * (q @ X.T)
        kth = np.partition(d2, k - 1, axis=1)[:, k - 1]
        # the expanded form is only a filter; exact distances decide order
        slack = 1e-9 * (qn + xn.max()) + 1e-300
        for r in range(q.shape[0]):
            cand = np.flatnonzero(d2[r] <= kth[r] + slack[r])
            exact = np.linalg.norm(X[cand] - q[r], axis=1)
            top = np.lexsort((cand, exact))[:k]
            ids[lo + r] = cand[top]
            dist[lo + r] = exact[top]
    return NeighborTable(ids, dist)


def recall_at_k(truth: NeighborTable, reduced: NeighborTable, k: int | None = None) -> float:
    """Mean over queries of |true k-NN  intersect  reduced k-NN| / k."""
    k = truth.k if k is None else k
    if truth.ids.shape[0] != reduced.ids.shape[0]:
        raise ValueError("tables cover different numbers of queries")
    if truth.k < k or reduced.k < k:
        raise ValueError(f"tables hold {truth.k} and {reduced.k} neighbors, need {k}")
    a, b = truth.ids[:, :k], reduced.ids[:, :k]
    hits = sum(len(set(x.tolist()) & set(y.tolist())) for x, y in zip(a, b))
    return hits / (k * a.shape[0])


def random_projection_fit(n: int, m: int, seed: int, variant: str = "gaussian") -> ProjectionModel:
    """Johnson-Lindenstrauss style projection (rows not normalized)."""
    if not 1 <= m <= n:
        raise ValueError(f"need 1 <= m <= n, got m={m}, n={n}")
    rng = np.random.default_rng(seed)
    if variant == "gaussian":
        M = rng.standard_normal((m, n)) / math.sqrt(m)
    elif variant == "sparse":
        # Achlioptas: +-sqrt(3/m) with prob 1/6 each, 0 with prob 2/3
        M = rng.choice(np.array([-1.0, 0.0, 1.0]), size=(m, n), p=[1 / 6, 2 / 3, 1 / 6]) * math.sqrt(3.0 / m)
    else:
        raise ValueError(f"unknown random projection variant {variant!r}")
    return ProjectionModel(M, np.zeros(n), config_echo={"method": "rp", "variant": variant, "seed": seed}, unit_rows=False)


def target_dim(drr: float, n: int) -> int:
    if not 0 < drr <= 1:
        raise ValueError(f"drr must lie in (0, 1], got {drr}")
    return max(1, int(math.floor(drr * n + 0.5)))


@dataclass(frozen=True)
class SweepGrid:
    drr_list: Sequence[float] = (0.05, 0.1, 0.2, 0.4, 0.6)
    k_list: Sequence[int] = (1, 3, 6, 10, 15)
    alpha_list: Sequence[float] = (1, 6, 12, 18, 25, 35, 50, 10000)
    b_list: Sequence[float] = (60, 70, 80, 90, 100)


@dataclass
class RecallRow:
    method: str
    drr: float
    k: int
    alpha: float | None
    b: float | None
    recall: float
    fit_seconds: float = 0.0
    transform_seconds: float = 0.0
    error: str | None = None

    def as_tuple(self, timings: bool = True):
        return (
            self.method,
            self.drr,
            self.k,
            self.alpha,
            self.b,
            self.recall,
            self.fit_seconds if timings else None,
            self.transform_seconds if timings else None,
        )


@dataclass
class RecallReport:
    rows: list[RecallRow] = field(default_factory=list)

    def write_csv(self, path, timings: bool = True) -> None:
        write_table(path, REPORT_HEADER, (r.as_tuple(timings) for r in self.rows))

    def winner_tally(self) -> dict[str, list[int]]:
        """Count first/second places per comparison cell.

        A cell is (drr, k) plus, when QPAD is present, one (alpha, b) pair;
        each QPAD setting competes against every baseline at that (drr, k).
        """
        order = {}
        for r in self.rows:
            order.setdefault(r.method, len(order))
        tally = {name: [0, 0] for name in order}
        base: dict[tuple, list[RecallRow]] = {}
        qpad: dict[tuple, list[RecallRow]] = {}
        for r in self.rows:
            if r.error is not None or math.isnan(r.recall):
                continue
            (qpad if r.method == "qpad" else base).setdefault((r.drr, r.k), []).append(r)
        cells = []
        if qpad:
            for key, rows in qpad.items():
                for q in rows:
                    cells.append([q] + base.get(key, []))
        else:
            cells = list(base.values())
        for cell in cells:
            ranked = sorted(cell, key=lambda r: (-r.recall, order[r.method]))
            tally[ranked[0].method][0] += 1
            if len(ranked) > 1:
                tally[ranked[1].method][1] += 1
        return tally

    def write_winners(self, path) -> None:
        rows = [(name, w[0], w[1]) for name, w in self.winner_tally().items()]
        write_table(path, ("method", "wins_first", "wins_second"), rows)


def _cell_seed(seed: int, coords: Sequence[int]) -> int:
    return int(np.random.SeedSequence([seed, *coords]).generate_state(1)[0])


@dataclass(frozen=True)
class _Job:
    method: str
    drr: float
    m: int
    alpha: float | None
    b: float | None
    seed: int


def _fit_model(job: _Job, train: np.ndarray, base_config: QpadConfig) -> ProjectionModel:
    if job.method == "qpad":
        cfg = QpadConfig(
            m=job.m,
            b_percent=job.b,
            alpha=job.alpha,
            max_iters_per_axis=base_config.max_iters_per_axis,
            grad_tol=base_config.grad_tol,
            seed=job.seed,
            restarts_per_axis=base_config.restarts_per_axis,
        )
        return fit(train, cfg, engine="fast")[0]
    variant = "sparse" if job.method == "rp-sparse" else "gaussian"
    return random_projection_fit(train.shape[1], job.m, job.seed, variant)


def _run_job(job, train, queries, truth, k_list, base_config, repeats):
    try:
        fit_times, tr_times = [], []
        for _ in range(repeats):
            t0 = time.perf_counter()
            model = _fit_model(job, train, base_config)
            fit_times.append(time.perf_counter() - t0)
            t0 = time.perf_counter()
            z_train = transform(model, train)
            z_query = transform(model, queries)
            tr_times.append(time.perf_counter() - t0)
        reduced = exact_knn(z_train, z_query, max(k_list))
        fs, ts = statistics.median(fit_times), statistics.median(tr_times)
        return [
            RecallRow(job.method, job.drr, k, job.alpha, job.b, recall_at_k(truth, reduced, k), fs, ts)
            for k in k_list
        ]
    except Exception as exc:  # a failed cell must not abort the sweep
        logger.warning("sweep cell %s failed: %s", job, exc)
        return [
            RecallRow(job.method, job.drr, k, job.alpha, job.b, float("nan"), error=f"{type(exc).__name__}: {exc}")
            for k in k_list
        ]


def run_sweep(
    ds,
    grid: SweepGrid,
    methods: Sequence[str] = ("qpad", "rp"),
    seed: int = 0,
    *,
    queries=None,
    query_count: int = 300,
    base_config: QpadConfig | None = None,
    workers: int = 1,
    repeats: int = 1,
) -> RecallReport:
    """Fit every (method, drr[, alpha, b]) combination on the train split and
    report Recall@k for each k.  Without explicit ``queries``, a held-out
    split of ``query_count`` rows is drawn from ``ds`` using ``seed``."""
    for meth in methods:
        if meth not in METHODS:
            raise ValueError(f"unknown method {meth!r}; expected one of {METHODS}")
    if queries is None:
        train_ds, query_ds = split(ds if isinstance(ds, Dataset) else Dataset(ds), SplitSpec(query_count, seed))
        train, qry = train_ds.vectors, query_ds.vectors
    else:
        train, qry = as_matrix(ds), as_matrix(queries)
    n = train.shape[1]
    k_list = sorted(set(int(k) for k in grid.k_list))
    if k_list[-1] > train.shape[0]:
        raise ValueError(f"k={k_list[-1]} exceeds the train size {train.shape[0]}")
    base_config = base_config or QpadConfig(m=1)
    truth = exact_knn(train, qry, k_list[-1])

    jobs = []
    for di, drr in enumerate(grid.drr_list):
        m = target_dim(drr, n)
        for mi, meth in enumerate(methods):
            if meth == "qpad":
                for ai, alpha in enumerate(grid.alpha_list):
                    for bi, b in enumerate(grid.b_list):
                        jobs.append(_Job(meth, drr, m, float(alpha), float(b), _cell_seed(seed, (mi, di, ai, bi))))
            else:
                jobs.append(_Job(meth, drr, m, None, None, _cell_seed(seed, (mi, di))))

    def run(job):
        return _run_job(job, train, qry, truth, k_list, base_config, repeats)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(job) for job in jobs]
    return RecallReport([row for rows in results for row in rows])
