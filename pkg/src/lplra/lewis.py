"""l_p Lewis weights and the row-sampling matrices built from them."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import qr

from .core import InvalidInputError, RngLike, as_matrix, as_rng, check_p


@dataclass(frozen=True)
class LewisWeights:
    weights: np.ndarray
    p: float
    fixed_point_residual: float
    converged: bool = True
    iterations: int = 0
    residual_history: tuple = field(default=(), compare=False)

    @property
    def probabilities(self) -> np.ndarray:
        return self.weights / self.weights.sum()


@dataclass(frozen=True)
class SamplingMatrix:
    source_rows: np.ndarray
    scales: np.ndarray
    source_rows_count: int
    p: float

    @property
    def entries(self) -> list[tuple[int, float]]:
        return [(int(i), float(s)) for i, s in zip(self.source_rows, self.scales)]

    def __len__(self) -> int:
        return int(self.source_rows.size)


def leverage_scores(A, rtol: float = 1e-12) -> np.ndarray:
    """Diagonal of the projection onto col(A), via pivoted thin QR."""
    A = as_matrix(A)
    if A.shape[1] == 0 or not np.any(A):
        return np.zeros(A.shape[0])
    Q, R, _ = qr(A, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    rank = int(np.sum(diag > rtol * diag[0])) if diag.size else 0
    return np.sum(Q[:, :rank] ** 2, axis=1)


def lewis_weights(A, p: float, max_iters: int = 200, tol: float = 1e-8) -> LewisWeights:
    """Fixed point w_i = tau_i(W^(1/2 - 1/p) A) by the Cohen-Peng iteration.

    Each step sets w_i <- (a_i^T (A^T W^(1-2/p) A)^+ a_i)^(p/2), i.e.
    (tau_i * w_i^(2/p - 1))^(p/2) where tau are leverage scores of the
    reweighted matrix.
    """
    A = as_matrix(A)
    p = check_p(p)
    n, d = A.shape
    if n == 0:
        raise InvalidInputError("A has no rows")
    if p == 2.0:
        lev = leverage_scores(A)
        return LewisWeights(lev, p, 0.0, True, 0, (0.0,))
    w = np.full(n, min(1.0, d / n))
    history = []
    residual = np.inf
    it = 0
    for it in range(1, max_iters + 1):
        # zero rows keep weight zero; guard the power for them
        safe = np.where(w > 0, w, 1.0)
        tau = leverage_scores(A * (safe ** (0.5 - 1.0 / p))[:, None])
        tau = np.where(w > 0, tau, 0.0)
        residual = float(np.max(np.abs(w - tau)))
        history.append(residual)
        if residual <= tol:
            break
        w_new = (tau * safe ** (2.0 / p - 1.0)) ** (p / 2.0)
        w = np.where(w > 0, w_new, 0.0)
    converged = residual <= tol
    return LewisWeights(w, p, residual, converged, it, tuple(history))


def default_sample_count(t: int, p: float, c0: float = 10.0) -> int:
    """ceil(c0 * t log t), with an extra (log log)^2 factor when p > 1."""
    t = max(int(t), 1)
    base = c0 * t * math.log(max(t, 2))
    if p > 1.0:
        base *= max(1.0, math.log(math.log(t + 2)) ** 2)
    return int(math.ceil(base))


def sampling_matrix(w: LewisWeights, r: int, rng: RngLike) -> SamplingMatrix:
    if r < 1:
        raise InvalidInputError("r must be at least 1")
    total = float(np.sum(w.weights))
    if not total > 0:
        raise InvalidInputError("Lewis weights are all zero")
    probs = w.weights / total
    g = as_rng(rng).generator
    rows = g.choice(probs.size, size=int(r), replace=True, p=probs)
    scales = 1.0 / (r * probs[rows]) ** (1.0 / w.p)
    return SamplingMatrix(rows.astype(np.int64), scales, int(probs.size), w.p)


def apply_sampling(S: SamplingMatrix, A) -> np.ndarray:
    A = as_matrix(A)
    if S.source_rows_count != A.shape[0]:
        raise InvalidInputError(
            f"sampler expects {S.source_rows_count} rows, matrix has {A.shape[0]}")
    if len(S) == 0:
        return np.zeros((0, A.shape[1]))
    return A[S.source_rows] * S.scales[:, None]
