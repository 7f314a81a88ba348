import numpy as np
import pytest

from lplra.core import SeededRng, entrywise_norm, numerical_rank
from lplra.css import CssConfig, css_error, random_column_subset_selection
from lplra.oracle import brute_force_opt, planted_instance
from lplra.rankreduce import (BlockEnumConfig, poly_k_error_and_rank, poly_k_not_bicriteria,
                              remove_bicriteria_rank)
from lplra.solvers import multi_response_regression


def _fit(A, U, p):
    X, _ = multi_response_regression(U, A, p)
    return entrywise_norm(U @ X - A, p)


def test_all_branch_matches_css():
    A = np.random.default_rng(0).standard_normal((15, 25))
    res = poly_k_error_and_rank(A, 1, 1.0, 4)
    assert res.branch == "all"
    np.testing.assert_array_equal(res.columns, res.css.selected)
    css = random_column_subset_selection(A, 1, 1.0, SeededRng(4).stream("css"))
    np.testing.assert_array_equal(res.columns, css.selected)


@pytest.mark.parametrize("p", [1.0, 1.5])
def test_exact_rank(p):
    inst = planted_instance(25, 40, 2, 0.0, p, 1)
    res = poly_k_error_and_rank(inst.A, 2, p, 1)
    assert _fit(inst.A, res.U, p) <= 1e-6 * entrywise_norm(inst.A, p)
    fp = poly_k_not_bicriteria(inst.A, 2, p, 1)
    assert fp.achieved_error_p <= 1e-6 * entrywise_norm(inst.A, p)
    assert numerical_rank(fp.product) <= 2


ENUM = BlockEnumConfig(epsilon=0.9, big_constant_C=1.0)
SMALL = CssConfig(r=1, repeats=2)


def test_enumeration_argmin_and_size():
    inst = planted_instance(20, 24, 1, 0.2, 1.0, 2)
    res = poly_k_error_and_rank(inst.A, 1, 1.0, 2, ENUM, SMALL)
    assert res.branch == "enumerate"
    best = min(err for _, err in res.audit)
    chosen = [err for I, err in res.audit if list(I) == res.chosen_blocks][0]
    assert chosen == best
    r = res.css.r
    assert res.columns.size <= 2 * r * r


def test_greedy_fallback():
    inst = planted_instance(20, 24, 1, 0.2, 1.0, 2)
    cfg = BlockEnumConfig(epsilon=0.9, big_constant_C=1.0, max_subsets=0)
    res = poly_k_error_and_rank(inst.A, 1, 1.0, 2, cfg, SMALL)
    assert res.branch == "greedy" and res.greedy_fallback


def test_shared_sketch_agrees_with_exact_mostly():
    agree = 0
    for s in range(10):
        inst = planted_instance(60, 24, 1, 0.3, 1.0, s)
        exact = poly_k_error_and_rank(inst.A, 1, 1.0, s, ENUM, SMALL)
        shared = poly_k_error_and_rank(inst.A, 1, 1.0, s,
                                       BlockEnumConfig(epsilon=0.9, big_constant_C=1.0,
                                                       shared_sketch=True), SMALL)
        agree += exact.chosen_blocks == shared.chosen_blocks
    assert agree >= 7


def test_within_factor_of_css_selection():
    for s in range(10):
        A = np.random.default_rng(s).standard_normal((15, 30))
        res = poly_k_error_and_rank(A, 1, 1.0, s, ENUM, SMALL)
        assert _fit(A, res.U, 1.0) <= 100 * css_error(A, res.css.selected, 1.0) + 1e-9


def test_remove_rank_cases():
    g = np.random.default_rng(3)
    U, V = g.standard_normal((8, 3)), g.standard_normal((3, 9))
    fp = remove_bicriteria_rank(U, V, 3, 1.0, 0)
    assert fp.info["path"] == "unchanged" and fp.achieved_error_p == 0.0
    U2 = np.hstack([U[:, :2], U[:, :1] + U[:, 1:2]])
    fp = remove_bicriteria_rank(U2, V, 2, 1.0, 0)
    assert fp.achieved_error_p <= 1e-6 * entrywise_norm(U2 @ V, 1.0)
    D = np.diag([10.0, 1.0])
    fp = remove_bicriteria_rank(D, np.eye(2), 1, 1.0, 0)
    assert fp.achieved_error_p <= 2.0
    assert brute_force_opt(D, 1, 1.0, restarts=5) == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("p", [1.0, 1.5])
def test_remove_rank_output_rank(p):
    for s in range(5):
        g = np.random.default_rng(s)
        fp = remove_bicriteria_rank(g.standard_normal((12, 5)), g.standard_normal((5, 10)), 2, p, s)
        assert numerical_rank(fp.product) <= 2


@pytest.mark.slow
def test_not_bicriteria_vs_oracle():
    good = 0
    for s in range(10):
        inst = planted_instance(12, 12, 1, 0.3, 1.0, s)
        fp = poly_k_not_bicriteria(inst.A, 1, 1.0, s)
        opt = brute_force_opt(inst.A, 1, 1.0, restarts=20, rng=s)
        assert numerical_rank(fp.product) <= 1
        good += fp.achieved_error_p <= 100 * opt
    assert good >= 8


def test_k_at_least_rank():
    A = np.random.default_rng(7).standard_normal((6, 2)) @ np.random.default_rng(8).standard_normal((2, 9))
    fp = poly_k_not_bicriteria(A, 3, 1.0, 0)
    assert fp.achieved_error_p <= 1e-8 * entrywise_norm(A, 1.0)
