import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from lplra.core import (FactorPair, InvalidInputError, SeededRng, as_matrix, check_p,
                        column_index_set, entrywise_norm, independent_columns,
                        make_factor_pair, norm_1p, numerical_rank, select_columns,
                        svd_truncate)

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
ps = st.floats(1.0, 2.0)


def mats(shape=(4, 5)):
    return arrays(np.float64, shape, elements=finite)


@pytest.mark.parametrize("p", [1.0, 1.3, 2.0])
def test_zero_matrix_norm(p):
    assert entrywise_norm(np.zeros((3, 4)), p) == 0.0


def test_small_norms():
    assert entrywise_norm([[3.0, -4.0]], 1) == 7.0
    assert entrywise_norm([[3.0, -4.0]], 2) == pytest.approx(5.0, rel=1e-15)


def test_norm_1p_examples():
    assert norm_1p(np.eye(2), 2) == 2.0
    assert norm_1p([[1.0, 0.0], [1.0, 0.0]], 1) == 2.0
    assert norm_1p([[3.0], [-4.0]], 2) == pytest.approx(5.0)


def test_norm_matches_direct_sum():
    A = np.random.default_rng(0).standard_normal((6, 7))
    for p in (1.0, 1.25, 1.5, 1.9):
        assert entrywise_norm(A, p) == pytest.approx(np.sum(np.abs(A) ** p) ** (1 / p), rel=1e-12)


def test_norm_does_not_overflow():
    A = np.full((2, 2), 1e300)
    assert entrywise_norm(A, 1.5) == pytest.approx(1e300 * 4 ** (1 / 1.5), rel=1e-12)


def test_select_columns():
    I = np.eye(3)
    np.testing.assert_array_equal(select_columns(I, [0, 2]), I[:, [0, 2]])
    np.testing.assert_array_equal(select_columns(I, range(3)), I)
    assert select_columns(I, []).shape == (3, 0)


def test_column_index_set_validation():
    np.testing.assert_array_equal(column_index_set([3, 1], 4), [1, 3])
    with pytest.raises(InvalidInputError):
        column_index_set([4], 4)
    with pytest.raises(InvalidInputError):
        column_index_set([1, 1], 4)


def test_non_finite_rejected():
    with pytest.raises(InvalidInputError):
        as_matrix([[1.0, np.nan]])
    with pytest.raises(InvalidInputError):
        entrywise_norm([[np.inf]], 1)


@pytest.mark.parametrize("p", [0.5, 2.5, float("nan")])
def test_bad_p(p):
    with pytest.raises(InvalidInputError):
        check_p(p)


@settings(max_examples=200, deadline=None)
@given(mats(), mats(), ps)
def test_triangle_inequality(A, B, p):
    assert entrywise_norm(A + B, p) <= entrywise_norm(A, p) + entrywise_norm(B, p) + 1e-9


@settings(max_examples=200, deadline=None)
@given(mats(), st.floats(-1e3, 1e3), ps)
def test_homogeneity(A, c, p):
    assert entrywise_norm(c * A, p) == pytest.approx(abs(c) * entrywise_norm(A, p),
                                                     rel=1e-12, abs=1e-300)


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, (3, 4), elements=st.floats(-1, 1)), ps, ps)
def test_monotone_in_p_for_unit_entries(A, p1, p2):
    lo, hi = sorted((p1, p2))
    assert entrywise_norm(A, hi) <= entrywise_norm(A, lo) * (1 + 1e-12) + 1e-15


def test_rng_streams_are_deterministic_and_independent():
    a = SeededRng(5).stream("x").generator.random(4)
    b = SeededRng(5).stream("x").generator.random(4)
    c = SeededRng(5).stream("y").generator.random(4)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)
    np.testing.assert_array_equal(SeededRng(5).stream("x").stream("z").generator.random(2),
                                  SeededRng(5).stream("x").stream("z").generator.random(2))


def test_factor_pair_error_and_shape_check():
    A = np.arange(12.0).reshape(3, 4)
    L, R = svd_truncate(A, 1)
    fp = make_factor_pair(A, L, R, 1, 1.0, "t", 0)
    assert fp.achieved_error_p == pytest.approx(entrywise_norm(L @ R - A, 1.0), rel=1e-9)
    assert fp.rank == 1
    with pytest.raises(InvalidInputError):
        FactorPair(np.zeros((3, 2)), np.zeros((1, 4)), 1, 0.0, "t", 0)


def test_rank_helpers():
    A = np.random.default_rng(1).standard_normal((6, 3))
    A = np.hstack([A, A[:, :1] + A[:, 1:2]])
    assert numerical_rank(A) == 3
    cols = independent_columns(A)
    assert cols.size == 3 and numerical_rank(A[:, cols]) == 3
    assert numerical_rank(np.zeros((2, 2))) == 0
