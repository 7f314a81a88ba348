"""Iterative random column subset selection for entrywise l_p error.

Each round draws several random blocks of 2r columns from the remaining
universe, fits every remaining column onto each block, and keeps the block
whose cheapest quarter of columns is cheapest overall.  Those cheap columns
count as covered and leave the universe together with the block.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import (RngLike, as_matrix, as_rng, check_p, column_index_set,
                   make_factor_pair, FactorPair)
from .lewis import apply_sampling, default_sample_count, lewis_weights, sampling_matrix
from .solvers import multi_response_regression


@dataclass(frozen=True)
class CssConfig:
    r_constant: float = 2.0
    discard_fraction: float = 0.25
    repeats: Optional[int] = None
    round_cap: Optional[int] = None
    fast_sketch: bool = False
    r: Optional[int] = None

    @classmethod
    def from_dict(cls, d: dict) -> "CssConfig":
        return cls(**{k: v for k, v in d.items() if k in cls.__dataclass_fields__})


@dataclass
class CssResult:
    selected: np.ndarray
    blocks: list
    covered_per_round: list
    round_costs: np.ndarray
    p: float
    k: int
    r: int
    rounds: int
    converged: bool = True
    info: dict = field(default_factory=dict)


def block_half_size(k: int, p: float, r_constant: float = 2.0) -> int:
    """r = ceil(c k log(k+1)), times (log log)^2 when p > 1."""
    base = r_constant * k * math.log(k + 1)
    if p > 1.0:
        base *= max(1.0, math.log(math.log(k + 2)) ** 2)
    return max(1, int(math.ceil(base)))


def round_cap(d: int, delta: float) -> int:
    if d <= 1:
        return 1
    return int(math.ceil(math.log(d) / math.log(1.0 / (1.0 - delta)))) + 1


def _fit_costs_pow(A: np.ndarray, S: np.ndarray, rest: np.ndarray, p: float,
                   fast: bool, rng) -> tuple[np.ndarray, bool]:
    AS = A[:, S]
    if fast:
        lw = lewis_weights(AS, p)
        Sm = sampling_matrix(lw, default_sample_count(S.size, p), rng)
        X, _, info = multi_response_regression(apply_sampling(Sm, AS),
                                               apply_sampling(Sm, A[:, rest]), p,
                                               return_info=True)
        R = AS @ X - A[:, rest]
        return np.sum(np.abs(R) ** p, axis=0), info["converged"]
    _, costs, info = multi_response_regression(AS, A[:, rest], p, return_info=True)
    return costs ** p, info["converged"]


def random_column_subset_selection(A, k: int, p: float, rng: RngLike = 0,
                                   cfg: CssConfig = CssConfig()) -> CssResult:
    A = as_matrix(A)
    p = check_p(p)
    if k < 1:
        raise ValueError("k must be at least 1")
    n, d = A.shape
    r = cfg.r if cfg.r is not None else block_half_size(k, p, cfg.r_constant)
    delta = cfg.discard_fraction
    repeats = cfg.repeats if cfg.repeats is not None else int(math.ceil(math.log2(max(d, 2)))) + 1
    cap = cfg.round_cap if cfg.round_cap is not None else round_cap(d, delta)
    g = as_rng(rng)
    gen = g.stream("css-blocks").generator

    T = np.arange(d)
    blocks, covered, costs = [], [], []
    converged = True
    rounds = 0
    while T.size and rounds < cap:
        rounds += 1
        if T.size <= 2 * r:
            blocks.append(T.copy())
            covered.append(np.zeros(0, dtype=np.int64))
            costs.append(0.0)
            T = T[:0]
            break
        best = None
        for j in range(repeats):
            S = np.sort(gen.choice(T, size=2 * r, replace=False))
            rest = np.setdiff1d(T, S)
            cp, ok = _fit_costs_pow(A, S, rest, p, cfg.fast_sketch,
                                    g.stream(f"css-fast-{rounds}-{j}"))
            converged &= ok
            m = rest.size
            keep = int(math.ceil(delta * m))
            order = np.argsort(cp, kind="stable")[:keep]
            c_j = float(np.sum(cp[order]))
            if best is None or c_j < best[0]:
                best = (c_j, S, np.sort(rest[order]))
        c_j, S, R = best
        blocks.append(S)
        covered.append(R)
        costs.append(c_j)
        T = np.setdiff1d(T, np.concatenate([S, R]))
    selected = np.sort(np.concatenate(blocks)) if blocks else np.zeros(0, dtype=np.int64)
    return CssResult(selected, blocks, covered, np.asarray(costs), p, int(k), int(r),
                     rounds, converged, {"repeats": repeats, "round_cap": cap,
                                         "uncovered": T.tolist()})


def css_fit(A, S, p: float):
    """Coefficients X with A_S X ~ A and the per-column l_p costs."""
    A = as_matrix(A)
    idx = column_index_set(S, A.shape[1])
    X = np.zeros((idx.size, A.shape[1]))
    costs = np.zeros(A.shape[1])
    if idx.size == 0:
        return idx, X, np.sum(np.abs(A) ** p, axis=0) ** (1.0 / p)
    rest = np.setdiff1d(np.arange(A.shape[1]), idx)
    X[np.arange(idx.size), idx] = 1.0
    if rest.size:
        Xr, cr = multi_response_regression(A[:, idx], A[:, rest], p)
        X[:, rest] = Xr
        costs[rest] = cr
    return idx, X, costs


def css_error(A, S, p: float) -> float:
    """l_p error of the best fit of A by combinations of its columns in S."""
    p = check_p(p)
    _, _, costs = css_fit(A, S, p)
    return float(np.sum(costs ** p) ** (1.0 / p))


def css_factor_pair(A, k: int, p: float, rng: RngLike = 0,
                    cfg: CssConfig = CssConfig()) -> tuple[FactorPair, CssResult]:
    A = as_matrix(A)
    res = random_column_subset_selection(A, k, p, rng, cfg)
    idx, X, _ = css_fit(A, res.selected, p)
    fp = make_factor_pair(A, A[:, idx], X, k, p, "css", as_rng(rng).seed,
                          selected=idx.tolist())
    return fp, res
