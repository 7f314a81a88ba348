import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lplra.core import BudgetExceededError, InvalidInputError, entrywise_norm
from lplra.sketch import med_p
from lplra.solvers import (best_left_factor, lp_regression, median_constraint_holds,
                           min_norm_with_median_constraint, multi_response_regression)


def test_identity_design():
    for p in (1.0, 1.5, 2.0):
        res = lp_regression(np.eye(3), [1.0, 2.0, 3.0], p)
        np.testing.assert_allclose(res.coefficients, [1, 2, 3], atol=1e-8)
        assert res.residual_p == pytest.approx(0.0, abs=1e-8)


def test_l1_median_and_l2_mean():
    U = np.ones((3, 1))
    b = [0.0, 1.0, 10.0]
    r1 = lp_regression(U, b, 1.0)
    assert r1.coefficients[0] == pytest.approx(1.0, abs=1e-9)
    assert r1.residual_p == pytest.approx(10.0, abs=1e-9)
    assert lp_regression(U, b, 2.0).coefficients[0] == pytest.approx(11 / 3, abs=1e-12)


@pytest.mark.parametrize("engine", ["auto", "simplex"])
def test_l1_matches_breakpoint_enumeration(engine):
    # 1-D design: the optimum sits at some breakpoint b_i / u_i
    g = np.random.default_rng(3)
    for _ in range(20):
        u = g.standard_normal(9)
        b = g.standard_normal(9)
        best = min(np.abs(u * (bi / ui) - b).sum() for ui, bi in zip(u, b))
        res = lp_regression(u[:, None], b, 1.0, engine=engine)
        assert res.residual_p == pytest.approx(best, rel=1e-9, abs=1e-12)


def test_l1_matches_vertex_enumeration_2d():
    g = np.random.default_rng(4)
    U = g.standard_normal((7, 2))
    b = g.standard_normal(7)
    best = np.inf
    for i, j in itertools.combinations(range(7), 2):
        x = np.linalg.solve(U[[i, j]], b[[i, j]])
        best = min(best, np.abs(U @ x - b).sum())
    assert lp_regression(U, b, 1.0).residual_p == pytest.approx(best, rel=1e-9)


@pytest.mark.parametrize("p", [1.0, 1.2, 1.5, 1.8])
def test_residual_recomputes_and_beats_least_squares(p):
    g = np.random.default_rng(int(p * 10))
    for _ in range(50):
        U = g.standard_normal((15, 3))
        b = g.standard_normal(15) + (g.random(15) < 0.2) * 20
        res = lp_regression(U, b, p)
        assert res.residual_p == pytest.approx(entrywise_norm((U @ res.coefficients - b)[:, None], p),
                                               rel=1e-7)
        ls = np.linalg.lstsq(U, b, rcond=None)[0]
        assert res.residual_p <= entrywise_norm((U @ ls - b)[:, None], p) * (1 + 1e-9)


def test_irls_is_stationary():
    g = np.random.default_rng(9)
    U, b, p = g.standard_normal((30, 3)), g.standard_normal(30), 1.5
    x = lp_regression(U, b, p).coefficients
    f = lambda y: np.sum(np.abs(U @ y - b) ** p)
    for d in np.eye(3):
        assert f(x) <= f(x + 1e-4 * d) + 1e-12 and f(x) <= f(x - 1e-4 * d) + 1e-12


def test_multi_response_examples():
    g = np.random.default_rng(0)
    U = g.standard_normal((6, 2))
    X, costs = multi_response_regression(U, U, 1.0)
    np.testing.assert_allclose(X, np.eye(2), atol=1e-9)
    np.testing.assert_allclose(costs, 0, atol=1e-9)
    Q, _ = np.linalg.qr(np.hstack([U, g.standard_normal((6, 1))]))
    w = Q[:, 2] * 3.0
    _, c2 = multi_response_regression(U, w[:, None], 2.0)
    assert c2[0] == pytest.approx(np.linalg.norm(w), rel=1e-9)
    B = g.standard_normal((6, 3))
    X0, c0 = multi_response_regression(np.zeros((6, 0)), B, 1.5)
    assert X0.shape == (0, 3)
    np.testing.assert_allclose(c0, np.sum(np.abs(B) ** 1.5, axis=0) ** (1 / 1.5))


def test_multi_response_equals_single_calls():
    g = np.random.default_rng(1)
    U, B = g.standard_normal((12, 3)), g.standard_normal((12, 4))
    for p in (1.0, 1.5):
        _, costs = multi_response_regression(U, B, p)
        single = [lp_regression(U, B[:, j], p).residual_p for j in range(4)]
        np.testing.assert_allclose(costs, single, rtol=1e-6)


def test_best_left_factor_cases():
    g = np.random.default_rng(2)
    U = g.standard_normal((8, 2))
    V = np.hstack([np.eye(2), g.standard_normal((2, 3))])
    A = U @ V
    for p in (1.0, 1.5):
        W = best_left_factor(V, A, p)
        assert entrywise_norm(W @ V - A, p) <= 1e-8 * entrywise_norm(A, p)
        np.testing.assert_allclose(best_left_factor(V, A, p, constraint_basis=np.eye(8)), W,
                                   atol=1e-9)
    W0 = best_left_factor(np.zeros((2, 5)), A, 1.0)
    np.testing.assert_array_equal(W0, 0.0)


def test_constrained_left_factor_stays_in_span():
    g = np.random.default_rng(5)
    A = g.standard_normal((10, 6))
    R = g.standard_normal((10, 3))
    V = g.standard_normal((2, 6))
    for p in (1.0, 1.5):
        W = best_left_factor(V, A, p, constraint_basis=R)
        coef = np.linalg.lstsq(R, W, rcond=None)[0]
        assert np.abs(R @ coef - W).max() < 1e-8


def test_shape_mismatch():
    with pytest.raises(InvalidInputError):
        lp_regression(np.eye(3), [1.0, 2.0], 1.0)


# -- median-constrained solve -------------------------------------------------

def test_median_zero_target_and_vacuous_constraint():
    M = np.random.default_rng(0).standard_normal((5, 2))
    res = min_norm_with_median_constraint(M, np.zeros(5), 0.0, 1.0)
    assert res.norm_p == 0.0
    s = np.array([1.0, -2.0, 3.0, 0.5, 4.0])
    res = min_norm_with_median_constraint(M, s, np.abs(s).max() / med_p(1.5).value, 1.5)
    np.testing.assert_array_equal(res.v, 0.0)


def test_median_identity_example():
    res = min_norm_with_median_constraint(np.eye(2), np.array([5.0, 5.0]), 1e-9, 1.0)
    assert res.norm_p == pytest.approx(5.0, abs=1e-6)
    assert sorted(np.round(np.abs(res.v), 6)) == [0.0, 5.0]


def _brute_min_norm(M, s, tau, p):
    # oracle: p = 1 LP per subset with scipy, independent of the package's solver
    from scipy.optimize import linprog

    r, k = M.shape
    h = math.ceil(r / 2)
    best = np.inf
    for T in itertools.combinations(range(r), h):
        T = list(T)
        c = np.concatenate([np.ones(2 * k)])
        A = np.vstack([np.hstack([M[T], -M[T]]), np.hstack([-M[T], M[T]])])
        b = np.concatenate([s[T] + tau, tau - s[T]])
        res = linprog(c, A_ub=A, b_ub=b, method="highs")
        if res.status == 0:
            best = min(best, res.fun)
    return best


@pytest.mark.parametrize("seed", range(8))
def test_median_solve_matches_subset_oracle(seed):
    g = np.random.default_rng(seed)
    r, k = 7, 1 + seed % 2
    M = g.standard_normal((r, k))
    s = g.standard_normal(r) * 3
    c = 0.3
    res = min_norm_with_median_constraint(M, s, c, 1.0)
    oracle = _brute_min_norm(M, s, c * med_p(1.0).value, 1.0)
    if not np.isfinite(oracle):
        assert res is None
    else:
        assert res.norm_p == pytest.approx(oracle, rel=1e-7, abs=1e-9)
        assert median_constraint_holds(M, s, res.v, c, 1.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([1.0, 1.5]))
def test_median_solve_monotone_in_c(seed, p):
    g = np.random.default_rng(seed)
    M = g.standard_normal((5, 2))
    s = g.standard_normal(5) * 2
    prev = np.inf
    for c in np.linspace(0.05, 3.0, 8):
        res = min_norm_with_median_constraint(M, s, c, p)
        norm = np.inf if res is None else res.norm_p
        if res is not None:
            assert median_constraint_holds(M, s, res.v, c, p, rtol=1e-6)
        assert norm <= prev * (1 + 1e-6) + 1e-9
        prev = norm


def test_median_subset_cap():
    g = np.random.default_rng(0)
    M, s = g.standard_normal((16, 2)), g.standard_normal(16) + 5
    with pytest.raises(BudgetExceededError):
        min_norm_with_median_constraint(M, s, 0.01, 1.0)
