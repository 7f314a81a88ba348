"""Rank reduction: best unions of selection blocks, and bringing a bicriteria
factorization down to rank exactly k."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .core import (FactorPair, InvalidInputError, RngLike, as_matrix, as_rng,
                   check_p, entrywise_norm, make_factor_pair, numerical_rank,
                   svd_truncate)
from .css import CssConfig, CssResult, random_column_subset_selection
from .lewis import apply_sampling, default_sample_count, lewis_weights, sampling_matrix
from .sketch import p_stable_sketch
from .solvers import best_left_factor, multi_response_regression


@dataclass(frozen=True)
class BlockEnumConfig:
    epsilon: float = 0.1
    big_constant_C: float = 8.0
    shared_sketch: bool = False
    max_subsets: int = 1_000_000

    def __post_init__(self):
        if not (0.0 < self.epsilon < 1.0):
            raise InvalidInputError("epsilon must lie in (0, 1)")

    @classmethod
    def from_dict(cls, d: dict) -> "BlockEnumConfig":
        return cls(**{k: v for k, v in d.items() if k in cls.__dataclass_fields__})


@dataclass
class PolyKResult:
    U: np.ndarray
    columns: np.ndarray
    chosen_blocks: list
    branch: str
    greedy_fallback: bool
    audit: list = field(default_factory=list)
    css: CssResult | None = None


def _fit_error(AT: np.ndarray, A: np.ndarray, p: float, S=None) -> float:
    if S is None:
        _, costs = multi_response_regression(AT, A, p)
    else:
        _, costs = multi_response_regression(apply_sampling(S, AT), apply_sampling(S, A), p)
    return float(np.sum(costs ** p) ** (1.0 / p))


def poly_k_error_and_rank(A, k: int, p: float, rng: RngLike = 0,
                          cfg: BlockEnumConfig = BlockEnumConfig(),
                          css_cfg: CssConfig = CssConfig()) -> PolyKResult:
    """Left factor made of the columns of the best union of r selection blocks."""
    A = as_matrix(A)
    p = check_p(p)
    g = as_rng(rng)
    res = random_column_subset_selection(A, k, p, g.stream("css"), css_cfg)
    blocks = res.blocks
    b, r = len(blocks), res.r

    def union(I):
        return np.sort(np.concatenate([blocks[i] for i in I]))

    if b < (cfg.big_constant_C / cfg.epsilon) * r or b <= r:
        I = list(range(b))
        cols = union(I)
        return PolyKResult(A[:, cols], cols, I, "all", False, [], res)

    S = None
    if cfg.shared_sketch:
        AT_all = A[:, res.selected]
        lw = lewis_weights(AT_all, p)
        S = sampling_matrix(lw, default_sample_count(numerical_rank(AT_all), p),
                            g.stream("shared-sketch"))

    audit = []
    if math.comb(b, r) <= cfg.max_subsets:
        best_I, best_err = None, np.inf
        for I in combinations(range(b), r):
            err = _fit_error(A[:, union(I)], A, p, S)
            audit.append((I, err))
            if err < best_err:
                best_I, best_err = list(I), err
        branch, greedy = "enumerate", False
    else:
        best_I = []
        for _ in range(r):
            step = None
            for i in range(b):
                if i in best_I:
                    continue
                I = sorted(best_I + [i])
                err = _fit_error(A[:, union(I)], A, p, S)
                audit.append((tuple(I), err))
                if step is None or err < step[1]:
                    step = (I, err)
            best_I = step[0]
        branch, greedy = "greedy", True
    cols = union(best_I)
    return PolyKResult(A[:, cols], cols, best_I, branch, greedy, audit, res)


def _column_basis(B: np.ndarray) -> np.ndarray:
    u, s, _ = np.linalg.svd(B, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return np.zeros((B.shape[0], 0))
    return u[:, s > 1e-9 * s[0]]


def remove_bicriteria_rank(U_B, V_B, k: int, p: float, rng: RngLike = 0,
                           sketch_rows: int | None = None,
                           refine_rounds: int = 2) -> FactorPair:
    """Rank-k factorization (W, Z) approximating B = U_B V_B in l_p.

    A p-stable sketch of B's rows gives a starting row space; alternating
    l_p fits then refine it, with W kept inside the column span of B.
    """
    U_B = as_matrix(U_B, "U_B")
    V_B = as_matrix(V_B, "V_B")
    p = check_p(p)
    B = U_B @ V_B
    r = U_B.shape[1]
    g = as_rng(rng)
    if k >= r:
        return make_factor_pair(B, U_B, V_B, k, p, "remove-rank", g.seed, path="unchanged")
    if numerical_rank(B) <= k:
        W, Z = svd_truncate(B, k)
        return make_factor_pair(B, W, Z, k, p, "remove-rank", g.seed, path="exact-rank")

    n, d = B.shape
    m = sketch_rows or 4 * max(r, k * k)
    SB = p_stable_sketch(m, n, p, g.stream("rank-sketch")).apply(B)
    Z0 = np.linalg.svd(SB, full_matrices=False)[2][:k]
    basis = _column_basis(B)

    def err(W, Z):
        return entrywise_norm(W @ Z - B, p)

    starts = [("sketch", Z0), ("svd", svd_truncate(B, k)[1])]
    best = None
    for name, Z in starts:
        W = best_left_factor(Z, B, p, constraint_basis=basis)
        e = err(W, Z)
        for _ in range(refine_rounds):
            Zn, _ = multi_response_regression(W, B, p)
            Wn = best_left_factor(Zn, B, p, constraint_basis=basis)
            en = err(Wn, Zn)
            if en < e:
                W, Z, e = Wn, Zn, en
            else:
                break
        if best is None or e < best[2]:
            best = (W, Z, e, name)
    W, Z, _, name = best
    return make_factor_pair(B, W, Z, k, p, "remove-rank", g.seed, path=name,
                            sketch_rows=m)


def poly_k_not_bicriteria(A, k: int, p: float, rng: RngLike = 0,
                          cfg: BlockEnumConfig = BlockEnumConfig(),
                          css_cfg: CssConfig = CssConfig(),
                          sketch_right: bool = True) -> FactorPair:
    """Rank-k factorization of A with poly(k) approximation factor."""
    A = as_matrix(A)
    p = check_p(p)
    g = as_rng(rng)
    pk = poly_k_error_and_rank(A, k, p, g.stream("polyk"), cfg, css_cfg)
    U = pk.U
    if sketch_right:
        lw = lewis_weights(U, p)
        S = sampling_matrix(lw, default_sample_count(max(numerical_rank(U), 1), p),
                            g.stream("right-sketch"))
        V, _ = multi_response_regression(apply_sampling(S, U), apply_sampling(S, A), p)
    else:
        V, _ = multi_response_regression(U, A, p)
    fp = remove_bicriteria_rank(U, V, k, p, g.stream("reduce"))
    return make_factor_pair(A, fp.left, fp.right, k, p, "polyk-exact", g.seed,
                            columns=pk.columns.tolist(), branch=pk.branch,
                            reduce_path=fp.info.get("path"))
