"""l_p regression, median-constrained minimum-norm solves and left-factor fits.

p = 1 problems are linear programs.  Small designs are solved exactly by
enumerating basic solutions; larger ones go through the dual LP
    max b.y  s.t.  U^T y = 0,  -1 <= y <= 1
whose equality multipliers are the primal coefficients.  For 1 < p < 2 we run
iteratively reweighted least squares, batched across response columns.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog, minimize

from .core import (BudgetExceededError, InvalidInputError, as_matrix,
                   as_vector, check_p, independent_columns,
                   numerical_rank)
from .simplex import linprog_simplex
from .sketch import med_p

VERTEX_SUBSET_LIMIT = 2000
IRLS_MAX_ITERS = 500
IRLS_RTOL = 1e-9
MEDIAN_SUBSET_CAP = 14


@dataclass
class RegressionResult:
    coefficients: np.ndarray
    residual_p: float
    converged: bool = True
    iterations: int = 0
    certificate: float = 0.0


@dataclass
class MedianSolveResult:
    """Minimum-norm v with med|Mv - s| <= c * med_p."""

    v: np.ndarray
    norm_p: float
    median_value: float
    threshold: float
    subsets_tried: int = 0
    converged: bool = True


def _col_norms(R: np.ndarray, p: float) -> np.ndarray:
    if R.shape[0] == 0:
        return np.zeros(R.shape[1])
    if p == 1.0:
        return np.abs(R).sum(axis=0)
    scale = np.abs(R).max(axis=0)
    safe = np.where(scale > 0, scale, 1.0)
    return scale * (np.sum(np.abs(R / safe) ** p, axis=0) ** (1.0 / p))


# -- p = 1 engines -----------------------------------------------------------

def _l1_vertex(U: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Exact l1 fit by trying every square nonsingular row subset."""
    n, r = U.shape
    subsets = np.array(list(combinations(range(n), r)), dtype=np.int64)
    UT = U[subsets]  # (S, r, r)
    sv = np.linalg.svd(UT, compute_uv=False)
    smax = np.linalg.norm(U, 2)
    ok = sv[:, -1] > 1e-10 * smax
    subsets, UT = subsets[ok], UT[ok]
    BT = B[subsets]  # (S, r, c)
    X = np.linalg.solve(UT, BT)
    costs = np.abs(np.einsum("nr,src->snc", U, X) - B[None]).sum(axis=1)  # (S, c)
    best = np.argmin(costs, axis=0)
    return X[best, :, np.arange(B.shape[1])].T


def _l1_polish(U: np.ndarray, b: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Snap an approximate l1 optimum to the nearby basic solution if not worse."""
    r = U.shape[1]
    res = np.abs(U @ x - b)
    order = np.argsort(res, kind="stable")
    # greedy independent rows in residual order, by incremental Gram-Schmidt
    Q = np.zeros((r, r))
    rows: list[int] = []
    for i in order:
        u = U[i]
        nu = np.linalg.norm(u)
        if nu == 0.0:
            continue
        q = u - Q[:len(rows)].T @ (Q[:len(rows)] @ u)
        nq = np.linalg.norm(q)
        if nq > 1e-8 * nu:
            Q[len(rows)] = q / nq
            rows.append(int(i))
            if len(rows) == r:
                break
    if len(rows) < r:
        return x
    xs = np.linalg.solve(U[rows], b[rows])
    if np.abs(U @ xs - b).sum() <= res.sum() * (1 + 1e-12) + 1e-300:
        return xs
    return x


def _l1_primal_highs(U: np.ndarray, b: np.ndarray) -> np.ndarray:
    n, r = U.shape
    c = np.concatenate([np.zeros(r), np.ones(n)])
    I = sp.identity(n, format="csr")
    Us = sp.csr_matrix(U)
    A_ub = sp.vstack([sp.hstack([Us, -I]), sp.hstack([-Us, -I])], format="csr")
    b_ub = np.concatenate([b, -b])
    bounds = [(None, None)] * r + [(0, None)] * n
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if res.status != 0:
        return np.linalg.lstsq(U, b, rcond=None)[0]
    return res.x[:r]


def _l1_simplex(U: np.ndarray, b: np.ndarray) -> np.ndarray:
    # variables x+ , x-, t  (all >= 0)
    n, r = U.shape
    c = np.concatenate([np.zeros(2 * r), np.ones(n)])
    I = np.eye(n)
    A_ub = np.vstack([np.hstack([U, -U, -I]), np.hstack([-U, U, -I])])
    b_ub = np.concatenate([b, -b])
    res = linprog_simplex(c, A_ub, b_ub)
    if not res.success:
        return np.linalg.lstsq(U, b, rcond=None)[0]
    return res.x[:r] - res.x[r:2 * r]


def _l1_dual_batched(U: np.ndarray, B: np.ndarray) -> np.ndarray:
    n, r = U.shape
    ncol = B.shape[1]
    A_eq = sp.kron(sp.identity(ncol, format="csr"), sp.csr_matrix(U.T), format="csr")
    c = -B.T.reshape(-1)
    res = linprog(c, A_eq=A_eq, b_eq=np.zeros(ncol * r), bounds=(-1.0, 1.0),
                  method="highs")
    X = np.empty((r, ncol))
    if res.status != 0:
        for j in range(ncol):
            X[:, j] = _l1_primal_highs(U, B[:, j])
        return X
    X[:] = (-res.eqlin.marginals).reshape(ncol, r).T
    y = res.x.reshape(ncol, n).T
    dual_obj = np.einsum("nc,nc->c", B, y)
    primal = np.abs(U @ X - B).sum(axis=0)
    scale = np.abs(B).sum(axis=0) + 1e-300
    bad = primal - dual_obj > 1e-7 * scale
    for j in np.nonzero(bad)[0]:
        X[:, j] = _l1_primal_highs(U, B[:, j])
    return X


def _l1_fit(U: np.ndarray, B: np.ndarray, engine: str) -> np.ndarray:
    n, r = U.shape
    if engine == "auto":
        engine = "vertex" if math.comb(n, r) <= VERTEX_SUBSET_LIMIT else "highs"
    if engine == "vertex":
        return _l1_vertex(U, B)
    if engine == "simplex":
        return np.column_stack([_l1_simplex(U, B[:, j]) for j in range(B.shape[1])])
    if engine == "highs":
        X = _l1_dual_batched(U, B)
        for j in range(B.shape[1]):
            X[:, j] = _l1_polish(U, B[:, j], X[:, j])
        return X
    raise InvalidInputError(f"unknown LP engine {engine!r}")


# -- 1 < p < 2 ---------------------------------------------------------------

def _irls(U: np.ndarray, B: np.ndarray, p: float):
    ncol = B.shape[1]
    X = np.linalg.lstsq(U, B, rcond=None)[0]
    scale = np.maximum(np.abs(B).max(axis=0), 1e-300)
    eps = 1e-8 * scale
    obj = np.sum(np.abs(U @ X - B) ** p, axis=0)
    best_X, best_obj = X.copy(), obj.copy()
    active = np.ones(ncol, dtype=bool)
    it = 0
    while active.any() and it < IRLS_MAX_ITERS:
        it += 1
        idx = np.nonzero(active)[0]
        R = U @ X[:, idx] - B[:, idx]
        W = np.maximum(np.abs(R), eps[idx]) ** (p - 2.0)
        G = np.einsum("ni,nj,nc->cij", U, U, W)
        rhs = np.einsum("ni,nc->ci", U, W * B[:, idx])
        try:
            Xn = np.linalg.solve(G, rhs[..., None])[..., 0].T
        except np.linalg.LinAlgError:
            Xn = np.stack([np.linalg.lstsq(G[c], rhs[c], rcond=None)[0]
                           for c in range(idx.size)], axis=1)
        new_obj = np.sum(np.abs(U @ Xn - B[:, idx]) ** p, axis=0)
        X[:, idx] = Xn
        improved = new_obj < best_obj[idx]
        best_X[:, idx[improved]] = Xn[:, improved]
        best_obj[idx[improved]] = new_obj[improved]
        rel = np.abs(obj[idx] - new_obj) / np.maximum(new_obj, 1e-300)
        obj[idx] = new_obj
        done = (rel < IRLS_RTOL) | (new_obj <= 1e-300)
        active[idx[done]] = False
    R = U @ best_X - B
    cert = np.linalg.norm(U.T @ (np.sign(R) * np.abs(R) ** (p - 1.0)), axis=0)
    return best_X, ~active, it, cert


# -- public API --------------------------------------------------------------

def _fit(U: np.ndarray, B: np.ndarray, p: float, engine: str):
    n, r = U.shape
    ncol = B.shape[1]
    X = np.zeros((r, ncol))
    conv = np.ones(ncol, dtype=bool)
    cert = np.zeros(ncol)
    iters = 0
    keep = independent_columns(U) if r else np.zeros(0, dtype=np.int64)
    if keep.size and ncol:
        Uk = U[:, keep]
        if p == 2.0:
            X[keep] = np.linalg.lstsq(Uk, B, rcond=None)[0]
        elif p == 1.0:
            X[keep] = _l1_fit(Uk, B, engine)
        else:
            Xk, conv, iters, cert = _irls(Uk, B, p)
            X[keep] = Xk
    return X, conv, iters, cert


def lp_regression(U, b, p: float, engine: str = "auto") -> RegressionResult:
    """min_x ||U x - b||_p."""
    U = as_matrix(U, "U")
    b = as_vector(b)
    p = check_p(p)
    if U.shape[0] != b.size or b.size < 1:
        raise InvalidInputError(f"U has {U.shape[0]} rows but b has {b.size}")
    X, conv, iters, cert = _fit(U, b[:, None], p, engine)
    x = X[:, 0]
    return RegressionResult(x, float(_col_norms((U @ x - b)[:, None], p)[0]),
                            bool(conv[0]), int(iters), float(cert[0]))


def multi_response_regression(U, B, p: float, engine: str = "auto",
                              return_info: bool = False):
    """Column-wise l_p regression of B onto U; returns (X, per-column costs)."""
    U = as_matrix(U, "U")
    B = as_matrix(B, "B")
    p = check_p(p)
    if U.shape[0] != B.shape[0]:
        raise InvalidInputError("U and B must have the same number of rows")
    X, conv, iters, cert = _fit(U, B, p, engine)
    costs = _col_norms(U @ X - B, p)
    if return_info:
        return X, costs, {"converged": bool(np.all(conv)), "iterations": int(iters)}
    return X, costs


def best_left_factor(V, A, p: float, constraint_basis=None, engine: str = "auto",
                     return_info: bool = False):
    """argmin_U ||U V - A||_p, optionally with U restricted to span(constraint_basis)."""
    V = as_matrix(V, "V")
    A = as_matrix(A)
    p = check_p(p)
    if V.shape[1] != A.shape[1]:
        raise InvalidInputError("V and A must have the same number of columns")
    n, d = A.shape
    k = V.shape[0]
    R = None
    if constraint_basis is not None:
        R = as_matrix(constraint_basis, "constraint_basis")
        if R.shape[0] != n:
            raise InvalidInputError("constraint basis must have n rows")
        if numerical_rank(R) == n:
            R = None
    if R is None:
        X, _, info = multi_response_regression(V.T, A.T, p, engine, return_info=True)
        U = X.T
    else:
        # U = Q G with Q an orthonormal basis of span(R); vec(Q G V) = (V^T kron Q) vec(G)
        u, s, _ = np.linalg.svd(R, full_matrices=False)
        t = int(np.sum(s > 1e-9 * s[0])) if s.size and s[0] > 0 else 0
        Q = u[:, :t]
        if t == 0 or k == 0:
            U = np.zeros((n, k))
            info = {"converged": True, "iterations": 0}
        else:
            design = np.kron(V.T, Q)
            res = lp_regression(design, A.T.reshape(-1), p, engine)
            G = res.coefficients.reshape(k, t).T
            U = Q @ G
            info = {"converged": res.converged, "iterations": res.iterations}
    if return_info:
        return U, info
    return U


# -- median-constrained minimum-norm solve --------------------------------------

def _median_of_abs(v: np.ndarray) -> float:
    h = math.ceil(v.size / 2)
    return float(np.partition(np.abs(v), h - 1)[h - 1])


def _sweep_1d(m: np.ndarray, s: np.ndarray, tau: float, h: int) -> Optional[float]:
    """Smallest |v| with at least h of |m_j v - s_j| <= tau (scalar v)."""
    fixed = (m == 0.0) & (np.abs(s) <= tau)
    need = h - int(fixed.sum())
    if need <= 0:
        return 0.0
    nz = m != 0.0
    lo = np.minimum((s[nz] - tau) / m[nz], (s[nz] + tau) / m[nz])
    hi = np.maximum((s[nz] - tau) / m[nz], (s[nz] + tau) / m[nz])
    cand = np.concatenate([[0.0], lo, hi])
    cover = ((lo[None, :] <= cand[:, None]) & (cand[:, None] <= hi[None, :])).sum(axis=1)
    good = cand[cover >= need]
    if good.size == 0:
        return None
    order = np.lexsort((good, np.abs(good)))
    return float(good[order[0]])


def _l1_subset_lp(MT: np.ndarray, sT: np.ndarray, tau: float) -> Optional[np.ndarray]:
    k = MT.shape[1]
    c = np.ones(2 * k)
    A_ub = np.vstack([np.hstack([MT, -MT]), np.hstack([-MT, MT])])
    b_ub = np.concatenate([sT + tau, tau - sT])
    res = linprog_simplex(c, A_ub, b_ub)
    if not res.success:
        return None
    return res.x[:k] - res.x[k:]


def _lp_subset_convex(MT: np.ndarray, sT: np.ndarray, tau: float, p: float,
                      x0: np.ndarray) -> np.ndarray:
    cons = [{"type": "ineq", "fun": lambda v: tau - (MT @ v - sT), "jac": lambda v: -MT},
            {"type": "ineq", "fun": lambda v: tau + (MT @ v - sT), "jac": lambda v: MT}]
    fun = lambda v: float(np.sum(np.abs(v) ** p))
    jac = lambda v: p * np.sign(v) * np.abs(v) ** (p - 1.0)
    res = minimize(fun, x0, jac=jac, constraints=cons, method="SLSQP",
                   options={"maxiter": 200, "ftol": 1e-12})
    v = res.x
    slack = tau - np.abs(MT @ v - sT)
    if np.all(np.isfinite(v)) and slack.min() >= -1e-9 * max(1.0, tau) and fun(v) <= fun(x0):
        return v
    return x0


def min_norm_with_median_constraint(M, s, c: float, p: float,
                                    subset_cap: int = MEDIAN_SUBSET_CAP,
                                    medp: Optional[float] = None
                                    ) -> Optional[MedianSolveResult]:
    """argmin ||v||_p subject to med(|M v - s|) / med_p <= c.

    med is the ceil(r/2)-th smallest entry, so the constraint holds exactly
    when at least ceil(r/2) coordinates satisfy |(Mv - s)_j| <= c * med_p.
    Returns None if no v is feasible.
    """
    M = as_matrix(M, "M")
    s = as_vector(s, "s")
    p = check_p(p)
    r, k = M.shape
    if r < 1 or s.size != r:
        raise InvalidInputError("M must have r >= 1 rows matching s")
    if c < 0:
        raise InvalidInputError("c must be non-negative")
    mp = med_p(p).value if medp is None else float(medp)
    tau = float(c) * mp
    h = math.ceil(r / 2)

    def result(v, tried):
        v = np.asarray(v, dtype=np.float64)
        return MedianSolveResult(v, float(np.sum(np.abs(v) ** p) ** (1.0 / p)) if v.size else 0.0,
                                 _median_of_abs(M @ v - s), tau, tried)

    if int(np.sum(np.abs(s) <= tau)) >= h:
        return result(np.zeros(k), 0)
    if k == 0:
        return None
    if k == 1:
        v = _sweep_1d(M[:, 0], s, tau, h)
        return None if v is None else result([v], r)
    if r > subset_cap:
        raise BudgetExceededError(
            f"median-constrained solve needs C({r},{h}) subset programs; cap is r <= {subset_cap}")
    best, best_norm, tried = None, np.inf, 0
    for T in combinations(range(r), h):
        T = list(T)
        tried += 1
        v = _l1_subset_lp(M[T], s[T], tau)
        if v is None:
            continue
        if p != 1.0:
            v = _lp_subset_convex(M[T], s[T], tau, p, v)
        nv = float(np.sum(np.abs(v) ** p))
        if best is None or nv < best_norm - 1e-12 * max(1.0, best_norm):
            best, best_norm = v, nv
    if best is None:
        return None
    return result(best, tried)


def median_constraint_holds(M, s, v, c: float, p: float, rtol: float = 1e-9) -> bool:
    tau = c * med_p(p).value
    return _median_of_abs(as_matrix(M) @ np.asarray(v, dtype=np.float64) - as_vector(s)) \
        <= tau + rtol * max(1.0, tau)
