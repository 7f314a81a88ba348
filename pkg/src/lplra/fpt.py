"""Guessed sketched left factors, per-column median-constrained right factors,
a cost-bound distribution LP with randomized rounding, and the wrapper that
adds a rank-2k correction to a rank-k initial solution.

Two ways of choosing the sketched left factor M are supported:

* ``full_enumeration`` tries every r x k matrix over a (coarsened) grid;
* ``oracle_guided`` uses the grid rounding of S U for a reference factor U,
  which stands in for the one good guess the enumeration is looking for.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product
from typing import Optional

import numpy as np

from .core import (FactorPair, InvalidInputError, RngLike, as_matrix, as_rng,
                   check_p, entrywise_norm, make_factor_pair, numerical_rank,
                   svd_truncate)
from .rankreduce import BlockEnumConfig, poly_k_not_bicriteria
from .css import CssConfig
from .simplex import linprog_simplex
from .sketch import med_p, p_stable_sketch
from .solvers import best_left_factor, min_norm_with_median_constraint

FULL = "full_enumeration"
ORACLE = "oracle_guided"


@dataclass(frozen=True)
class FptBudget:
    sketch_rows: int = 11
    grid_values_per_entry: Optional[int] = None
    max_guesses: int = 1_000_000
    q_norm_constant: Optional[float] = None
    subset_cap: int = 14
    mode: str = ORACLE
    poly_exponent: float = 3.0
    c_eps: float = 2.0
    c_hi: float = 2.0
    trials: Optional[int] = None

    def __post_init__(self):
        if self.mode not in (FULL, ORACLE):
            raise InvalidInputError(f"unknown mode {self.mode!r}")
        if self.sketch_rows < 1:
            raise InvalidInputError("sketch_rows must be positive")

    @classmethod
    def from_dict(cls, d: dict) -> "FptBudget":
        return cls(**{k: v for k, v in d.items() if k in cls.__dataclass_fields__})

    def q(self, k: int) -> float:
        return float(k) if self.q_norm_constant is None else float(self.q_norm_constant)


# -- grids -------------------------------------------------------------------

@dataclass(frozen=True)
class GuessGrid:
    ratio: float
    min_mag: float
    max_mag: float
    include_zero: bool = True

    def __post_init__(self):
        if not self.ratio > 1.0:
            raise InvalidInputError("grid ratio must exceed 1; reduce f or the poly exponent")
        if not 0.0 < self.min_mag < self.max_mag:
            raise InvalidInputError("grid needs 0 < min_mag < max_mag")

    @property
    def exponents(self) -> np.ndarray:
        L = math.log(self.ratio)
        lo = math.ceil(math.log(self.min_mag) / L - 1e-12)
        hi = math.floor(math.log(self.max_mag) / L + 1e-12)
        return np.arange(lo, hi + 1)

    @property
    def magnitudes(self) -> np.ndarray:
        return self.ratio ** self.exponents.astype(np.float64)

    @property
    def values(self) -> np.ndarray:
        m = self.magnitudes
        return np.concatenate([-m[::-1], [0.0], m])

    def round(self, X) -> np.ndarray:
        """Entrywise nearest grid value (large entries clamp to +-max grid value)."""
        X = np.asarray(X, dtype=np.float64)
        vals = self.values
        idx = np.clip(np.searchsorted(vals, X), 1, vals.size - 1)
        lo, hi = vals[idx - 1], vals[idx]
        return np.where(np.abs(X - lo) <= np.abs(hi - X), lo, hi)

    @classmethod
    def for_instance(cls, norm_A: float, k: int, eps: float, f: float,
                     exponent: float = 3.0, cap: Optional[int] = None) -> "GuessGrid":
        poly = (k / eps) ** exponent
        ratio = 1.0 + 1.0 / (f * poly)
        lo, hi = norm_A / (f * poly), poly * norm_A
        if hi <= lo:
            hi = lo * ratio
        grid = cls(ratio, lo, hi)
        if cap is not None:
            allowed = max((cap - 1) // 2, 0)
            if allowed == 0:
                return cls(ratio, hi * 2, hi * 2 * ratio)  # empty magnitude set
            s = 1
            while grid.magnitudes.size > allowed:
                s += 1
                grid = cls(ratio ** s, lo, hi)
        return grid


def cost_bounds(norm_A: float, d: int, eps: float, f: float, p: float,
                c_hi: float = 2.0) -> np.ndarray:
    """Integer powers of (1+eps) between (eps^2/f)||A||/d^(1/p) and c_hi ||A||."""
    if norm_A <= 0:
        return np.zeros(0)
    L = math.log1p(eps)
    lo = eps * eps / f * norm_A / d ** (1.0 / p)
    t0 = math.ceil(math.log(lo) / L - 1e-12)
    t1 = math.floor(math.log(c_hi * norm_A) / L + 1e-12)
    return np.exp(np.arange(t0, t1 + 1) * L)


def delta_value(opt_hat: float, norm_A: float, eps: float, f: float, poly: float,
                p: float, c_eps: float = 2.0) -> float:
    return ((1.0 + c_eps * eps) ** p * (opt_hat + norm_A / (f * poly)) ** p
            + (eps * eps / f) ** p * norm_A ** p)


# -- LP and rounding ---------------------------------------------------------

@dataclass
class ColumnLpSolution:
    x: np.ndarray  # (d, m); zero where the pair is unavailable
    feasible: bool
    objective: float = float("nan")
    available: Optional[np.ndarray] = None


def build_cost_bound_lp(costs, norms_pow, Delta: float, norm_budget: float,
                        p: float) -> ColumnLpSolution:
    """Distribution over cost bounds per column, minimising expected cost.

    ``costs[i, c]`` is the sketched cost of column i's candidate at bound c
    (NaN when unavailable) and ``norms_pow`` the p-th power of its norm.
    """
    C = np.asarray(costs, dtype=np.float64)
    N = np.asarray(norms_pow, dtype=np.float64)
    d, m = C.shape
    avail = np.isfinite(C) & np.isfinite(N)
    if d == 0:
        return ColumnLpSolution(np.zeros((0, m)), True, 0.0, avail)
    if not np.all(avail.any(axis=1)):
        return ColumnLpSolution(np.zeros((d, m)), False, available=avail)
    rows, cols = np.nonzero(avail)
    nv = rows.size
    Cp = C[rows, cols] ** p
    A_eq = np.zeros((d, nv))
    A_eq[rows, np.arange(nv)] = 1.0
    A_ub = np.vstack([N[rows, cols], Cp])
    b_ub = np.array([norm_budget, Delta])
    # scale the two budget rows so the tableau stays well conditioned
    sc = np.maximum(np.abs(A_ub).max(axis=1), 1e-300)
    res = linprog_simplex(Cp / max(Cp.max(), 1e-300), A_ub / sc[:, None], b_ub / sc,
                          A_eq, np.ones(d))
    if not res.success:
        return ColumnLpSolution(np.zeros((d, m)), False, available=avail)
    x = np.zeros((d, m))
    x[rows, cols] = res.x
    return ColumnLpSolution(x, True, float(Cp @ res.x), avail)


@dataclass
class RoundedFactor:
    V: np.ndarray
    accepted: bool
    draws_used: int
    choice: Optional[np.ndarray] = None
    norm_pow: float = float("nan")
    cost_pow: float = float("nan")


def sample_rounded_right_factor(lp: ColumnLpSolution, catalog: np.ndarray, costs,
                                trials: int, rng: RngLike, norm_limit: float,
                                cost_limit: float, p: float) -> RoundedFactor:
    """Draw column i's candidate with probability x[i, c]; accept the first
    draw meeting both the norm and sketched-cost limits."""
    d, m, k = catalog.shape
    C = np.asarray(costs, dtype=np.float64)
    if trials <= 0 or not lp.feasible:
        return RoundedFactor(np.zeros((k, d)), False, 0)
    P = np.clip(lp.x, 0.0, None)
    P = P / P.sum(axis=1, keepdims=True)
    cdf = np.cumsum(P, axis=1)
    cdf[:, -1] = 1.0
    gen = as_rng(rng).generator
    out = None
    for t in range(1, trials + 1):
        u = gen.random(d)
        choice = np.array([int(np.searchsorted(cdf[i], u[i], side="right")) for i in range(d)])
        choice = np.minimum(choice, m - 1)
        # guard against landing on a zero-probability slot through rounding
        for i in range(d):
            if P[i, choice[i]] == 0.0:
                choice[i] = int(np.argmax(P[i]))
        V = catalog[np.arange(d), choice].T.copy()
        norm_pow = float(np.sum(np.abs(V) ** p))
        cost_pow = float(np.sum(C[np.arange(d), choice] ** p))
        out = RoundedFactor(V, False, t, choice, norm_pow, cost_pow)
        if norm_pow <= norm_limit and cost_pow <= cost_limit:
            out.accepted = True
            return out
    return out


# -- single guess ------------------------------------------------------------

@dataclass
class GuessOutcome:
    index: int
    lp_feasible: bool
    accepted: bool
    draws_used: int
    error: float
    U: Optional[np.ndarray] = None
    V: Optional[np.ndarray] = None
    lp: Optional[ColumnLpSolution] = None
    rounded: Optional[RoundedFactor] = None


class _GuessEvaluator:
    """Per-instance state shared by all guesses (and all OPT estimates)."""

    def __init__(self, A: np.ndarray, k: int, eps: float, f: float, p: float,
                 budget: FptBudget, rng, constraint_basis=None):
        self.A, self.k, self.eps, self.f, self.p = A, k, eps, f, p
        self.budget = budget
        self.rng = rng
        self.constraint_basis = constraint_basis
        n, d = A.shape
        self.norm_A = entrywise_norm(A, p)
        self.poly = (k / eps) ** budget.poly_exponent
        self.S = p_stable_sketch(budget.sketch_rows, n, p, rng.stream("sketch")).matrix
        self.SA = self.S @ A
        self.bounds = cost_bounds(self.norm_A, d, eps, f, p, budget.c_hi)
        self.medp = med_p(p).value
        self.q = budget.q(k)
        self._cache: dict[bytes, tuple] = {}

    def catalog(self, M: np.ndarray):
        key = M.tobytes()
        if key in self._cache:
            return self._cache[key]
        d = self.A.shape[1]
        m = self.bounds.size
        V = np.full((d, m, self.k), np.nan)
        C = np.full((d, m), np.nan)
        for i in range(d):
            s = self.SA[:, i]
            for j, c in enumerate(self.bounds):
                res = min_norm_with_median_constraint(M, s, c, self.p,
                                                      self.budget.subset_cap, self.medp)
                if res is None:
                    continue
                V[i, j] = res.v
                C[i, j] = res.median_value / self.medp
        Npow = np.where(np.isnan(C), np.nan, np.sum(np.abs(np.nan_to_num(V)) ** self.p, axis=2))
        out = (V, C, Npow)
        self._cache[key] = out
        return out

    def evaluate(self, M: np.ndarray, opt_hat: float, index: int, rng) -> GuessOutcome:
        p, k, eps = self.p, self.k, self.eps
        V, C, Npow = self.catalog(M)
        Delta = delta_value(opt_hat, self.norm_A, eps, self.f, self.poly, p, self.budget.c_eps)
        lp = build_cost_bound_lp(C, Npow, Delta, k * self.q ** p, p)
        if not lp.feasible:
            return GuessOutcome(index, False, False, 0, np.inf, lp=lp)
        trials = self.budget.trials if self.budget.trials is not None else math.ceil(10.0 / eps)
        rf = sample_rounded_right_factor(lp, np.nan_to_num(V), C, trials, rng,
                                         2.0 * k * self.q ** p / eps,
                                         (1.0 + 2.0 * eps) * Delta, p)
        if rf.draws_used == 0:
            return GuessOutcome(index, True, False, 0, np.inf, lp=lp, rounded=rf)
        U = best_left_factor(rf.V, self.A, p, constraint_basis=self.constraint_basis)
        err = entrywise_norm(U @ rf.V - self.A, p)
        return GuessOutcome(index, True, rf.accepted, rf.draws_used, err, U, rf.V, lp, rf)

    def oracle_guess(self, U_ref: np.ndarray, V_ref: np.ndarray, grid: GuessGrid) -> np.ndarray:
        return grid.round(self.S @ normalize_reference(U_ref, V_ref, self.p)[0])


def normalize_reference(U: np.ndarray, V: np.ndarray, p: float):
    """Rewrite U V with V's rows l2-orthonormal and then of unit l_p norm."""
    U = as_matrix(U, "U")
    V = as_matrix(V, "V")
    Q, R = np.linalg.qr(V.T)
    Vn = Q.T
    Un = U @ R.T
    s = np.sum(np.abs(Vn) ** p, axis=1) ** (1.0 / p)
    s = np.where(s > 0, s, 1.0)
    return Un * s[None, :], Vn / s[:, None]


@dataclass
class FptResult:
    factors: FactorPair
    outcomes: list = field(default_factory=list)
    flags: dict = field(default_factory=dict)


def _early_exact(A: np.ndarray, k: int, p: float, seed: int, tag: str):
    if numerical_rank(A) <= k:
        L, R = svd_truncate(A, k)
        if L.shape[1] < k:
            L = np.hstack([L, np.zeros((A.shape[0], k - L.shape[1]))])
            R = np.vstack([R, np.zeros((k - R.shape[0], A.shape[1]))])
        return make_factor_pair(A, L, R, k, p, tag, seed, early_return=True)
    return None


def guessing_additive_eps_approximation(A, k: int, eps: float, f: float, opt_hat: float,
                                        p: float, budget: FptBudget = FptBudget(),
                                        rng: RngLike = 0, oracle=None,
                                        constraint_basis=None,
                                        _evaluator: Optional[_GuessEvaluator] = None,
                                        detailed: bool = False):
    """Rank-k factorization with (1+O(eps)) relative plus eps/f-scaled additive error.

    ``oracle`` is an optional (U_ref, V_ref) pair used in oracle-guided mode;
    without it the rank-k truncated SVD of A serves as the reference.
    Returns a FactorPair, or an FptResult when ``detailed`` is set.
    """
    A = as_matrix(A)
    p = check_p(p)
    if not (0.0 < eps < 1.0):
        raise InvalidInputError("eps must lie in (0, 1)")
    if f <= 1.0:
        raise InvalidInputError("f must exceed 1")
    g = as_rng(rng)
    exact = _early_exact(A, k, p, g.seed, "fpt")
    if exact is not None:
        return FptResult(exact, [], {"early_return": True}) if detailed else exact

    ev = _evaluator or _GuessEvaluator(A, k, eps, f, p, budget, g, constraint_basis)
    grid = GuessGrid.for_instance(ev.norm_A, k, eps, f, budget.poly_exponent,
                                  budget.grid_values_per_entry)
    flags = {"budget_exhausted": False, "all_infeasible": False, "mode": budget.mode,
             "grid_values_per_entry": int(grid.values.size)}
    outcomes: list[GuessOutcome] = []
    if budget.mode == ORACLE:
        if oracle is None:
            oracle = svd_truncate(A, k)
        M = ev.oracle_guess(oracle[0], oracle[1], grid)
        outcomes.append(ev.evaluate(M, opt_hat, 0, g.stream("round-0")))
    else:
        r = budget.sketch_rows
        vals = grid.values
        total = vals.size ** (r * k)
        flags["total_guesses"] = int(total)
        for idx, entries in enumerate(product(vals, repeat=r * k)):
            if idx >= budget.max_guesses:
                flags["budget_exhausted"] = True
                break
            M = np.asarray(entries, dtype=np.float64).reshape(r, k)
            outcomes.append(ev.evaluate(M, opt_hat, idx, g.stream(f"round-{idx}")))

    best = None
    for o in outcomes:
        if o.U is not None and (best is None or o.error < best.error):
            best = o
    n, d = A.shape
    if best is None:
        flags["all_infeasible"] = True
        fp = make_factor_pair(A, np.zeros((n, k)), np.zeros((k, d)), k, p, "fpt", g.seed,
                              **flags)
    else:
        flags.update(best_index=best.index, accepted=best.accepted,
                     draws_used=best.draws_used)
        fp = make_factor_pair(A, best.U, best.V, k, p, "fpt", g.seed, **flags)
    if detailed:
        return FptResult(fp, outcomes, flags)
    return fp


def opt_grid(svd_error: float, eps: float, n: int, d: int) -> np.ndarray:
    """SvdError / (1+eps)^t for t = 0 .. ceil(log(nd)/eps)."""
    T = math.ceil(math.log(max(n * d, 2)) / eps)
    return svd_error * np.exp(-np.arange(T + 1) * math.log1p(eps))


def rounding_guessing_eps_approximation(A, k: int, eps: float, p: float,
                                        budget: FptBudget = FptBudget(), rng: RngLike = 0,
                                        f: float = 8.0, oracle=None,
                                        block_cfg: BlockEnumConfig = BlockEnumConfig(),
                                        css_cfg: CssConfig = CssConfig(),
                                        detailed: bool = False):
    """Rank <= 3k approximation B + UV with B a rank-k initial solution.

    ``oracle`` optionally supplies the reference (U_ref, V_ref) for the
    residual C = A - B; by default the rank-2k truncated SVD of C is used.
    """
    A = as_matrix(A)
    p = check_p(p)
    g = as_rng(rng)
    n, d = A.shape
    init = poly_k_not_bicriteria(A, k, p, g.stream("init"), block_cfg, css_cfg)
    B = init.product
    C = A - B
    svd_err = entrywise_norm(C - np.matmul(*svd_truncate(C, 2 * k)), p)
    grid = opt_grid(svd_err, eps, n, d)
    flags = {"svd_error": svd_err, "opt_grid": grid.tolist(), "init_error": init.achieved_error_p,
             "init_factors": (init.left, init.right)}

    best_err = entrywise_norm(A, p)
    best = (np.zeros((n, 0)), np.zeros((0, d)))
    best_t = None
    per_t = []
    exact = _early_exact(C, 2 * k, p, g.seed, "fpt")
    if exact is not None:
        cand = [(0, exact)]
    else:
        if oracle is None and budget.mode == ORACLE:
            oracle = svd_truncate(C, 2 * k)
        ev = _GuessEvaluator(C, 2 * k, eps, f, p, budget, g.stream("guess"))
        cand = []
        for t, opt_hat in enumerate(grid):
            fp = guessing_additive_eps_approximation(C, 2 * k, eps, f, float(opt_hat), p,
                                                     budget, g.stream(f"opt-{t}"),
                                                     oracle=oracle, _evaluator=ev)
            cand.append((t, fp))
    for t, fp in cand:
        L = np.hstack([init.left, fp.left])
        R = np.vstack([init.right, fp.right])
        err = entrywise_norm(L @ R - A, p)
        per_t.append(err)
        if err <= best_err:
            best_err, best, best_t = err, (L, R), t
    flags.update(best_t=best_t, errors_per_t=per_t, early_return=exact is not None)
    out = make_factor_pair(A, best[0], best[1], k, p, "fpt-3k", g.seed, **flags)
    if detailed:
        return FptResult(out, [], flags)
    return out
