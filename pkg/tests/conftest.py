import itertools

import numpy as np
import pytest

from qpad import optimizer

# every ascent run during the session, for the suite-wide monotonicity check
# (trace, grad_tol) for every ascent run during the session
RECORDED_TRACES: list = []
# id(x_c) -> [x_c, smallest mu, largest mu] over every objective evaluation
RECORDED_MU: dict = {}
ACCEPTANCE_LINES: list[str] = []

_original_ascend = optimizer.ascend
_original_make_objective = optimizer.make_objective


def _recording_ascend(objective, w0, max_iters, grad_tol):
    w, trace = _original_ascend(objective, w0, max_iters, grad_tol)
    RECORDED_TRACES.append((trace, grad_tol))
    return w, trace


def _recording_make_objective(x_c, *args, **kwargs):
    inner = _original_make_objective(x_c, *args, **kwargs)
    entry = RECORDED_MU.setdefault(id(x_c), [x_c, np.inf, -np.inf])

    def objective(w):
        phi, g, info = inner(w)
        entry[1] = min(entry[1], info.mu)
        entry[2] = max(entry[2], info.mu)
        return phi, g, info

    return objective


optimizer.ascend = _recording_ascend
optimizer.make_objective = _recording_make_objective


def pytest_collection_modifyitems(items):
    # acceptance checks inspect everything the other modules recorded
    items.sort(key=lambda item: item.path.name == "test_acceptance.py")


def monotonicity_violations(traces, tol=1e-12):
    bad = 0
    for tr, _ in traces:
        phis = np.array([it[0] for it in tr.iterations])
        bad += int(np.count_nonzero(np.diff(phis) < -tol))
    return bad


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
    terminalreporter.write_line(
        f"optimizer runs recorded: {len(RECORDED_TRACES)}, "
        f"monotonicity violations: {monotonicity_violations(RECORDED_TRACES)}"
    )


def pytest_sessionfinish(session, exitstatus):
    if monotonicity_violations(RECORDED_TRACES):
        session.exitstatus = 1


def brute_gaps(p):
    """All (gap, i, j) with i < j, sorted by (gap, i, j)."""
    p = np.asarray(p, dtype=np.float64)
    return sorted((abs(p[i] - p[j]), i, j) for i, j in itertools.combinations(range(len(p)), 2))


def brute_coefficients(p, B):
    c = np.zeros(len(p), dtype=np.int64)
    for _, i, j in brute_gaps(p)[:B]:
        hi, lo = (j, i) if p[j] >= p[i] else (i, j)
        c[hi] += 1
        c[lo] -= 1
    return c


def diameter(x):
    """Exact max pairwise distance, in row blocks to bound memory."""
    x = np.asarray(x, dtype=np.float64)
    rows = max(1, 4_000_000 // max(1, x.size))
    best = 0.0
    for lo in range(0, len(x), rows):
        d = np.sqrt(((x[lo:lo + rows, None, :] - x[None, :, :]) ** 2).sum(-1))
        best = max(best, float(d.max()))
    return best


def random_unit(rng, n):
    v = rng.standard_normal(n)
    return v / np.linalg.norm(v)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
