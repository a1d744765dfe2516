import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import brute_coefficients, brute_gaps, random_unit
from qpad.fast import (
    assemble_coefficients,
    count_pairs_leq,
    gradient_mu,
    mu_b_fast,
    select_threshold,
    sort_projection,
    sum_pairs_lt,
)
from qpad.naive import mu_b_naive, selection_count


def test_sort_projection():
    sp = sort_projection([3.0, 1.0, 2.0])
    np.testing.assert_array_equal(sp.s, [1, 2, 3])
    np.testing.assert_array_equal(sp.order, [1, 2, 0])
    np.testing.assert_array_equal(sort_projection([1.0, 2.0, 3.0]).prefix, [0, 1, 3, 6])


def test_sort_projection_stable():
    sp = sort_projection([5.0, 5.0])
    np.testing.assert_array_equal(sp.order, [0, 1])


@pytest.mark.parametrize("s, delta, expected", [([0, 1, 3], 1, 1), ([0, 1, 3], 2.5, 2), ([0, 0, 5], 0, 1)])
def test_count_pairs_leq(s, delta, expected):
    assert count_pairs_leq(sort_projection(np.array(s, float)), delta) == expected


@pytest.mark.parametrize(
    "s, delta, count, total",
    [([0, 1, 3], 3, 2, 3.0), ([0, 1, 3], 0, 0, 0.0), ([0, 0, 5], 5, 1, 0.0)],
)
def test_sum_pairs_lt(s, delta, count, total):
    assert sum_pairs_lt(sort_projection(np.array(s, float)), delta) == (count, total)


def test_select_threshold_examples():
    assert select_threshold(sort_projection(np.array([0.0, 1, 3])), 2) == (2.0, 1)
    assert select_threshold(sort_projection(np.array([0.0, 0, 5])), 2) == (5.0, 1)
    s = np.array([0.0, 1, 2, 3])
    gaps = brute_gaps(s)
    assert [g for g, _, _ in gaps] == [1, 1, 1, 2, 2, 3]
    assert select_threshold(sort_projection(s), 3) == (1.0, 3)


def test_select_threshold_range():
    sp = sort_projection(np.array([0.0, 1.0, 3.0]))
    with pytest.raises(ValueError):
        select_threshold(sp, 0)
    with pytest.raises(ValueError):
        select_threshold(sp, 4)


def test_mu_fast_small_examples():
    x = np.array([[0.0], [1.0], [3.0]])
    ev = mu_b_fast(x, np.array([1.0]), 100)
    assert (ev.mu, ev.delta_star, ev.R) == (2.0, 3.0, 1)
    ev = mu_b_fast(x, np.array([1.0]), 33.4)
    assert (ev.mu, ev.delta_star, ev.R, ev.B) == (1.0, 1.0, 1, 1)
    np.testing.assert_array_equal(ev.c, brute_coefficients([0.0, 1.0, 3.0], 1))
    np.testing.assert_array_equal(ev.c, [-1, 1, 0])
    assert ev.mu == mu_b_naive(x, np.array([1.0]), 33.4).mu


@pytest.mark.parametrize(
    "s, B, expected",
    [([0.0, 1.0, 3.0], 2, [-1, 0, 1]), ([0.0, 1.0, 3.0], 3, [-2, 0, 2]), ([0.0, 1.0], 1, [-1, 1])],
)
def test_assemble_coefficients(s, B, expected):
    sp = sort_projection(np.array(s))
    delta, R = select_threshold(sp, B)
    c = assemble_coefficients(sp, delta, R)
    np.testing.assert_array_equal(c, brute_coefficients(s, B))
    np.testing.assert_array_equal(c, expected)


def test_all_equal_projection():
    x = np.ones((6, 2))
    ev = mu_b_fast(x, np.array([0.6, 0.8]), 50)
    assert ev.mu == 0.0 and ev.delta_star == 0.0 and ev.R == ev.B
    assert ev.c.sum() == 0


def test_gradient_zero_coefficients():
    from qpad.fast import AxisEvaluation

    ev = AxisEvaluation(mu=0.0, delta_star=0.0, R=1, B=1, c=np.zeros(3, dtype=np.int64))
    np.testing.assert_array_equal(gradient_mu(np.ones((3, 2)), ev), [0.0, 0.0])


def test_gradient_on_planar_embedding():
    x = np.array([[0.0, 0.0], [1.0, 0.0], [3.0, 0.0]])
    w = np.array([1.0, 0.0])
    ev = mu_b_fast(x, w, 33.4)
    g = gradient_mu(x, ev)
    h = 1e-6
    fd = [(mu_b_fast(x, w + h * e, 33.4).mu - mu_b_fast(x, w - h * e, 33.4).mu) / (2 * h) for e in np.eye(2)]
    np.testing.assert_allclose(g, [1.0, 0.0])
    np.testing.assert_allclose(fd, g, atol=1e-6)


def test_gradient_finite_differences(rng):
    h = 1e-6
    checked = 0
    for _ in range(30):
        N, n = int(rng.integers(10, 60)), int(rng.integers(2, 6))
        x = rng.standard_normal((N, n))
        w = random_unit(rng, n)
        b = float(rng.uniform(10, 100))
        ev = mu_b_fast(x, w, b)
        fd = np.empty(n)
        stable = True
        for i in range(n):
            e = np.zeros(n)
            e[i] = h
            hi, lo = mu_b_fast(x, w + e, b), mu_b_fast(x, w - e, b)
            stable &= np.array_equal(hi.c, ev.c) and np.array_equal(lo.c, ev.c)
            fd[i] = (hi.mu - lo.mu) / (2 * h)
        if stable:
            checked += 1
            np.testing.assert_allclose(gradient_mu(x, ev), fd, atol=1e-5)
    assert checked >= 20


def test_gradient_identity_on_tie_free(rng):
    x = rng.standard_normal((40, 4))
    w = random_unit(rng, 4)
    ev = mu_b_fast(x, w, 55)
    sel = mu_b_naive(x, w, 55)
    p = x @ w
    g = sum(np.sign(p[j] - p[i]) * (x[j] - x[i]) for i, j in sel.selected_pairs) / sel.B
    np.testing.assert_allclose(gradient_mu(x, ev), g, atol=1e-12)


@settings(max_examples=150, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    N=st.integers(2, 80),
    n=st.integers(1, 6),
    b=st.floats(1, 100),
    rounding=st.sampled_from([None, 0, 1]),
)
def test_fast_matches_naive(seed, N, n, b, rounding):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((N, n))
    if rounding is not None:
        x = np.round(x, rounding)
    w = random_unit(rng, n)
    B = selection_count(N, b)
    if B < 1:
        with pytest.raises(ValueError):
            mu_b_fast(x, w, b)
        return
    ev = mu_b_fast(x, w, b)
    sel = mu_b_naive(x, w, b)
    assert abs(ev.mu - sel.mu) <= 1e-9 * max(1.0, sel.mu)
    assert ev.delta_star == sel.distances[-1]
    mult = int(np.count_nonzero(np.abs((x @ w)[:, None] - (x @ w)[None, :])[np.triu_indices(N, 1)] == ev.delta_star))
    assert 1 <= ev.R <= mult
    assert ev.c.sum() == 0
    assert np.abs(ev.c).sum() <= 2 * ev.B
    assert 0 <= ev.mu <= ev.delta_star
    if rounding is None:
        np.testing.assert_array_equal(ev.c, brute_coefficients(x @ w, B))


@settings(max_examples=60, deadline=None)
@given(
    s=st.lists(st.floats(-50, 50, allow_nan=False), min_size=2, max_size=40),
    d1=st.floats(0, 100),
    d2=st.floats(0, 100),
)
def test_count_monotone_and_extremes(s, d1, d2):
    sp = sort_projection(np.array(s))
    lo, hi = sorted((d1, d2))
    assert count_pairs_leq(sp, lo) <= count_pairs_leq(sp, hi)
    N = len(s)
    assert count_pairs_leq(sp, float(sp.s[-1] - sp.s[0])) == N * (N - 1) // 2
    brute = sum(1 for g, _, _ in brute_gaps(s) if g <= lo)
    assert count_pairs_leq(sp, lo) == brute


def test_prefix_invariants(rng):
    p = rng.standard_normal(17)
    sp = sort_projection(p)
    assert np.all(np.diff(sp.s) >= 0)
    np.testing.assert_array_equal(sp.s[np.argsort(sp.order)], p)
    assert sp.prefix[0] == 0 and sp.prefix[-1] == pytest.approx(p.sum())
