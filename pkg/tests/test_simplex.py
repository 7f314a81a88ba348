import numpy as np
import pytest
from scipy.optimize import linprog

from lplra.simplex import INFEASIBLE, OPTIMAL, UNBOUNDED, linprog_simplex


def test_textbook_lp():
    # max 3x + 5y s.t. x <= 4, 2y <= 12, 3x + 2y <= 18  -> (2, 6), 36
    res = linprog_simplex([-3, -5], [[1, 0], [0, 2], [3, 2]], [4, 12, 18])
    assert res.status == OPTIMAL
    np.testing.assert_allclose(res.x, [2, 6], atol=1e-9)
    assert res.fun == pytest.approx(-36)


def test_equality_and_negative_rhs():
    res = linprog_simplex([1, 1], A_ub=[[-1, 0]], b_ub=[-1], A_eq=[[1, -1]], b_eq=[-2])
    assert res.success
    np.testing.assert_allclose(res.x, [1, 3], atol=1e-9)


def test_infeasible_and_unbounded():
    assert linprog_simplex([1], A_ub=[[1]], b_ub=[-1]).status == INFEASIBLE
    assert linprog_simplex([-1], A_ub=[[-1]], b_ub=[0]).status == UNBOUNDED


def test_degenerate_problem_terminates():
    # classic cycling example under Dantzig's rule
    c = [-0.75, 150, -0.02, 6]
    A = [[0.25, -60, -0.04, 9], [0.5, -90, -0.02, 3], [0, 0, 1, 0]]
    res = linprog_simplex(c, A, [0, 0, 1])
    assert res.success
    assert res.fun == pytest.approx(-0.05, abs=1e-9)


@pytest.mark.parametrize("seed", range(40))
def test_matches_reference_solver(seed):
    g = np.random.default_rng(seed)
    m, n = g.integers(2, 8), g.integers(2, 8)
    A = g.standard_normal((m, n))
    b = np.abs(g.standard_normal(m)) + 0.1
    c = g.standard_normal(n)
    A_eq = g.standard_normal((1, n)) if seed % 2 else None
    b_eq = [0.0] if seed % 2 else None
    bounds_box = np.eye(n)
    A_ub = np.vstack([A, bounds_box])
    b_ub = np.concatenate([b, np.full(n, 5.0)])
    ref = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, method="highs")
    ours = linprog_simplex(c, A_ub, b_ub, A_eq, b_eq)
    assert ours.success == (ref.status == 0)
    if ref.status == 0:
        assert ours.fun == pytest.approx(ref.fun, abs=1e-7)
        assert np.all(A_ub @ ours.x <= b_ub + 1e-8) and np.all(ours.x >= -1e-9)
