import json

import numpy as np
import pytest

from lplra.core import SeededRng, entrywise_norm, numerical_rank
from lplra.css import css_error
from lplra.io import read_matrix
from lplra.oracle import (brute_force_opt, codim_one_opt, hard_instance, hardness_statistic,
                          planted_instance, svd_baseline)


@pytest.mark.parametrize("noise", ["gaussian", "sparse"])
def test_planted_invariants(noise):
    inst = planted_instance(9, 7, 2, 0.3, 1.5, 4, noise=noise)
    assert entrywise_norm(inst.A - inst.U_star @ inst.V_star, 1.5) == pytest.approx(
        inst.noise_norm_p, rel=1e-9)
    again = planted_instance(9, 7, 2, 0.3, 1.5, 4, noise=noise)
    np.testing.assert_array_equal(inst.A, again.A)
    assert numerical_rank(planted_instance(9, 7, 2, 0.0, 1.0, 4).A) == 2


def test_planted_save(tmp_path):
    inst = planted_instance(5, 4, 1, 0.1, 1.0, 3)
    inst.save(tmp_path / "inst")
    np.testing.assert_array_equal(read_matrix(tmp_path / "inst.mtx"), inst.A)
    meta = json.loads((tmp_path / "inst.json").read_text())
    assert meta == {"seed": 3, "k": 1, "p": 1.0, "noise_norm_p": inst.noise_norm_p}


def test_hard_instance():
    h = hard_instance(3, 6, 1)
    assert h.M.shape == (9, 6)
    np.testing.assert_array_equal(h.M[3:], np.eye(6))
    np.testing.assert_array_equal(h.M, hard_instance(3, 6, 1).M)
    # zeroing the identity block is a rank-k candidate with error^p exactly n
    cand = h.M.copy()
    cand[3:] = 0
    assert numerical_rank(cand) <= 3
    assert entrywise_norm(cand - h.M, 1.0) == h.opt_upper_bound_pow


def test_brute_force_examples():
    A = np.random.default_rng(0).standard_normal((5, 2)) @ np.random.default_rng(1).standard_normal((2, 6))
    assert brute_force_opt(A, 2, 1.0, restarts=3) <= 1e-9 * entrywise_norm(A, 1.0)
    assert brute_force_opt(np.diag([10.0, 1.0]), 1, 1.0, restarts=5) == pytest.approx(1.0)
    assert brute_force_opt(np.eye(3), 3, 1.5) == 0.0


def test_codim_one_p1_matches_vertex_search():
    # p = 1, rank d-1: error is min over x of ||Ax||_1 / ||x||_inf, attained at a vertex
    g = np.random.default_rng(2)
    A = g.standard_normal((5, 3))
    best = np.inf
    # pin the largest coordinate x_j = 1 and scan the others over a fine grid of [-1, 1]
    grid = np.linspace(-1, 1, 201)
    for j in range(3):
        others = [i for i in range(3) if i != j]
        X = np.zeros((3, grid.size ** 2))
        a, b = np.meshgrid(grid, grid)
        X[j] = 1.0
        X[others[0]] = a.ravel()
        X[others[1]] = b.ravel()
        best = min(best, np.abs(A @ X).sum(axis=0).min())
    val = codim_one_opt(A, 1.0)
    assert val <= best + 1e-12
    assert val >= best - 0.05 * best


@pytest.mark.parametrize("p", [1.0, 1.5])
def test_brute_force_monotone_and_below_svd(p):
    g = np.random.default_rng(int(10 * p))
    for _ in range(3):
        A = g.standard_normal((6, 5))
        vals = [brute_force_opt(A, k, p, restarts=5, rng=1) for k in range(1, 5)]
        assert all(b <= a * (1 + 1e-9) for a, b in zip(vals, vals[1:]))
        for k, v in zip(range(1, 5), vals):
            assert v <= svd_baseline(A, k, p) * (1 + 1e-12)


@pytest.mark.slow
def test_svd_within_remark_factor():
    g = np.random.default_rng(3)
    for t in range(50):
        p = 1.0 if t % 2 == 0 else 1.5
        A = g.standard_normal((4, 4))
        opt = brute_force_opt(A, 1, p, restarts=5, rng=t)
        svd = svd_baseline(A, 1, p)
        assert opt <= svd * (1 + 1e-12)
        assert svd <= (16 ** (1 / p - 0.5)) * opt * 1.1


def test_svd_baseline_rank_k_zero():
    A = np.outer(np.arange(1.0, 5.0), np.arange(1.0, 4.0))
    assert svd_baseline(A, 1, 1.0) <= 1e-12


def test_hardness_statistic_matches_full_css_error():
    # the reduced design must agree with css_error on the full (k+n) x n matrix
    k, n, seed = 3, 6, 0
    val = hardness_statistic(k, n, 1, seed, 1.0)
    M = hard_instance(k, n, SeededRng(seed)).M
    S = SeededRng(seed).stream("subsets").generator.choice(n, size=n // 2, replace=False)
    assert val == pytest.approx(css_error(M, S, 1.0) / n, rel=1e-9)
    assert val >= 0.5
