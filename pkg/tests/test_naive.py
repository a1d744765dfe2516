import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import brute_gaps, diameter, random_unit
from qpad.linalg import QpadConfig
from qpad.naive import (
    NaiveCapExceeded,
    fit_naive,
    gradient_naive,
    mu_b_naive,
    objective_naive,
    select_pairs,
    selection_count,
)


def test_selection_count_floor():
    assert selection_count(3, 100) == 3
    assert selection_count(3, 33.4) == 1
    assert selection_count(10, 70) == 31  # 31.5 floors
    assert selection_count(2, 99.9) == 0


def test_mean_of_all_gaps():
    assert select_pairs(np.array([0.0, 1.0, 3.0]), 100).mu == 2.0


def test_single_smallest_gap():
    sel = select_pairs(np.array([0.0, 1.0, 3.0]), 33.4)
    assert sel.B == 1 and sel.mu == 1.0
    assert sel.selected_pairs == [(0, 1)]


def test_tie_broken_by_pair_order():
    p = np.array([0.0, 0.0, 5.0])
    # B = floor(0.67 * 3) = 2
    sel = select_pairs(p, 67)
    expected = brute_gaps(p)[:2]
    assert sel.B == 2
    assert sel.mu == 2.5 == np.mean([g for g, _, _ in expected])
    assert sel.selected_pairs == [(i, j) for _, i, j in expected] == [(0, 1), (0, 2)]


def test_zero_selection_is_error():
    with pytest.raises(ValueError, match="increase b or N"):
        select_pairs(np.array([0.0, 1.0]), 50)


def test_two_points_full_selection():
    sel = mu_b_naive(np.array([[0.0, 1.0], [2.0, 3.0]]), np.array([1.0, 0.0]), 100)
    assert sel.B == 1 and sel.mu == 2.0


def test_objective_penalty_cases():
    x = np.array([[0.0, 0.0], [1.0, 0.0], [3.0, 1.0]])
    w = np.array([1.0, 0.0])
    mu = mu_b_naive(x, w, 100).mu
    assert objective_naive(x, w, [], 100, 5.0) == mu
    assert objective_naive(x, w, [np.array([0.0, 1.0])], 100, 5.0) == mu
    assert objective_naive(x, w, [w.copy()], 100, 1.0) == pytest.approx(mu - 1.0)


def test_gradient_matches_pairwise_sum(rng):
    x = rng.standard_normal((25, 4))
    w = random_unit(rng, 4)
    sel = mu_b_naive(x, w, 40)
    p = x @ w
    g = sum(np.sign(p[i] - p[j]) * (x[i] - x[j]) for i, j in sel.selected_pairs) / sel.B
    np.testing.assert_allclose(gradient_naive(x, w, sel), g, atol=1e-12)


finite = st.floats(-100, 100, allow_nan=False)


@settings(max_examples=60, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    N=st.integers(3, 40),
    n=st.integers(1, 5),
    b=st.floats(10, 100),
    shift=st.lists(finite, min_size=5, max_size=5),
    scale=st.floats(0.01, 100),
)
def test_invariances(seed, N, n, b, shift, scale):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((N, n))
    w = random_unit(rng, n)
    if selection_count(N, b) < 1:
        return
    mu = mu_b_naive(x, w, b).mu
    assert 0 <= mu <= diameter(x) + 1e-9
    # translation
    assert mu_b_naive(x + np.array(shift[:n]), w, b).mu == pytest.approx(mu, rel=1e-9, abs=1e-9)
    # scale homogeneity
    assert mu_b_naive(scale * x, w, b).mu == pytest.approx(scale * mu, rel=1e-9, abs=1e-12)
    # rotation equivariance
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    assert mu_b_naive(x @ q.T, q @ w, b).mu == pytest.approx(mu, rel=1e-9, abs=1e-12)


def test_lipschitz_sampled(rng):
    x = rng.standard_normal((40, 5))
    diam = diameter(x)
    for _ in range(200):
        w, v = random_unit(rng, 5), random_unit(rng, 5)
        assert abs(mu_b_naive(x, w, 60).mu - mu_b_naive(x, v, 60).mu) <= diam * np.linalg.norm(w - v) + 1e-9


def _grid_best_angle(x, b):
    angles = np.arange(0.0, np.pi, 0.001)
    vals = [mu_b_naive(x, np.array([np.cos(a), np.sin(a)]), b).mu for a in angles]
    return angles[int(np.argmax(vals))]


def test_fit_naive_aligns_with_line(rng):
    direction = np.array([np.cos(0.7), np.sin(0.7)])
    x = rng.standard_normal(60)[:, None] * direction
    best = _grid_best_angle(x - x.mean(0), 70)
    assert abs(np.array([np.cos(best), np.sin(best)]) @ direction) >= 0.99
    model, _ = fit_naive(x, QpadConfig(m=1, b_percent=70, seed=3))
    assert abs(model.directions[0] @ direction) >= 0.99


def test_fit_naive_full_rank_orthogonal(rng):
    x = rng.standard_normal((60, 3)) * np.array([3.0, 2.0, 1.0])
    model, _ = fit_naive(x, QpadConfig(m=3, b_percent=70, alpha=10000, seed=1))
    gram = model.directions @ model.directions.T
    assert np.abs(gram - np.eye(3)).max() <= 0.05


def test_fit_naive_two_points():
    x = np.array([[0.0, 0.0], [1.0, 2.0]])
    with pytest.raises(ValueError):
        fit_naive(x, QpadConfig(m=1, b_percent=50))
    model, traces = fit_naive(x, QpadConfig(m=1, b_percent=100, max_iters_per_axis=50))
    p = x @ model.directions[0]
    assert traces[0].final_phi == pytest.approx(abs(p[1] - p[0]))


def test_fit_naive_cap():
    x = np.zeros((11, 2)) + np.arange(11.0)[:, None]
    with pytest.raises(NaiveCapExceeded, match="--force-naive"):
        fit_naive(x, QpadConfig(m=1), cap=10)
    model, _ = fit_naive(x, QpadConfig(m=1, max_iters_per_axis=2, restarts_per_axis=1), cap=10, force=True)
    assert model.m == 1
