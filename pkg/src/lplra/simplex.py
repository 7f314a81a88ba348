"""Dense two-phase tableau simplex with Bland's anti-cycling rule.

Solves  min c.x  s.t.  A_ub x <= b_ub,  A_eq x = b_eq,  x >= 0.
Intended for the small LPs that appear inside the median-constrained solve
and the cost-bound distribution LP.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration_limit"


@dataclass
class LPResult:
    status: str
    x: Optional[np.ndarray]
    fun: float
    iterations: int

    @property
    def success(self) -> bool:
        return self.status == OPTIMAL


def _pivot(T: np.ndarray, row: int, col: int) -> None:
    T[row] /= T[row, col]
    colv = T[:, col].copy()
    colv[row] = 0.0
    nz = np.nonzero(colv)[0]
    if nz.size:
        T[nz] -= np.outer(colv[nz], T[row])


def _run(T: np.ndarray, basis: np.ndarray, ncols: int, tol: float,
         max_iter: int) -> tuple[str, int]:
    """Iterate on tableau T whose last row is the reduced-cost row.

    Only the first ``ncols`` columns may enter the basis.
    """
    m = T.shape[0] - 1
    it = 0
    while it < max_iter:
        red = T[-1, :ncols]
        cand = np.nonzero(red < -tol)[0]
        if cand.size == 0:
            return OPTIMAL, it
        col = int(cand[0])  # Bland: lowest index
        colv = T[:m, col]
        pos = np.nonzero(colv > tol)[0]
        if pos.size == 0:
            return UNBOUNDED, it
        ratios = T[pos, -1] / colv[pos]
        best = ratios.min()
        ties = pos[ratios <= best + tol * max(1.0, abs(best))]
        # Bland: among ties leave the variable with lowest index
        row = int(ties[np.argmin(basis[ties])])
        _pivot(T, row, col)
        basis[row] = col
        it += 1
    return ITERATION_LIMIT, it


def linprog_simplex(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None,
                    tol: float = 1e-9, max_iter: int = 50_000) -> LPResult:
    c = np.asarray(c, dtype=np.float64).reshape(-1)
    nv = c.size
    A_ub = np.zeros((0, nv)) if A_ub is None else np.asarray(A_ub, dtype=np.float64).reshape(-1, nv)
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=np.float64).reshape(-1)
    A_eq = np.zeros((0, nv)) if A_eq is None else np.asarray(A_eq, dtype=np.float64).reshape(-1, nv)
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=np.float64).reshape(-1)
    m_ub, m_eq = A_ub.shape[0], A_eq.shape[0]
    m = m_ub + m_eq
    if m == 0:
        if np.any(c < 0):
            return LPResult(UNBOUNDED, None, -np.inf, 0)
        return LPResult(OPTIMAL, np.zeros(nv), 0.0, 0)

    # columns: original | slacks | artificials | rhs
    A = np.zeros((m, nv + m_ub))
    A[:m_ub, :nv] = A_ub
    A[:m_ub, nv:] = np.eye(m_ub)
    A[m_ub:, :nv] = A_eq
    b = np.concatenate([b_ub, b_eq])
    neg = b < 0
    A[neg] *= -1.0
    b = np.abs(b)

    basis = np.full(m, -1, dtype=np.int64)
    for i in range(m_ub):
        if not neg[i]:
            basis[i] = nv + i
    art_rows = np.nonzero(basis < 0)[0]
    n_art = art_rows.size
    nstruct = nv + m_ub
    T = np.zeros((m + 1, nstruct + n_art + 1))
    T[:m, :nstruct] = A
    T[:m, -1] = b
    for j, i in enumerate(art_rows):
        T[i, nstruct + j] = 1.0
        basis[i] = nstruct + j

    iters = 0
    if n_art:
        # phase 1: minimise the sum of artificials
        T[-1, :] = 0.0
        T[-1, :nstruct] = -T[art_rows, :nstruct].sum(axis=0)
        T[-1, -1] = -T[art_rows, -1].sum()
        status, it = _run(T, basis, nstruct + n_art, tol, max_iter)
        iters += it
        if status == ITERATION_LIMIT:
            return LPResult(status, None, np.nan, iters)
        if -T[-1, -1] > tol * max(1.0, float(b.max())) * 10:
            return LPResult(INFEASIBLE, None, np.nan, iters)
        # drive artificials out of the basis where possible
        for i in range(m):
            if basis[i] >= nstruct:
                nzc = np.nonzero(np.abs(T[i, :nstruct]) > tol)[0]
                if nzc.size:
                    _pivot(T, i, int(nzc[0]))
                    basis[i] = int(nzc[0])
        keep = basis < nstruct
        # redundant rows still holding artificials are dropped
        T = np.vstack([T[:m][keep], T[-1:]])
        basis = basis[keep]
        T = np.hstack([T[:, :nstruct], T[:, -1:]])
        m = basis.size

    # phase 2 objective row: reduced costs for current basis
    cost = np.zeros(nstruct)
    cost[:nv] = c
    T[-1, :] = 0.0
    T[-1, :nstruct] = cost
    cb = cost[basis]
    T[-1, :] -= cb @ T[:m, :]
    status, it = _run(T, basis, nstruct, tol, max_iter)
    iters += it
    if status != OPTIMAL:
        return LPResult(status, None, -np.inf if status == UNBOUNDED else np.nan, iters)
    xfull = np.zeros(nstruct)
    xfull[basis] = T[:m, -1]
    x = np.maximum(xfull[:nv], 0.0)
    return LPResult(OPTIMAL, x, float(c @ x), iters)
