"""Matrix helpers, entrywise norms, seeded random streams and factor pairs.

Matrices are plain 2-D ``float64`` numpy arrays; :func:`as_matrix` is the
single validation gate used by every public entry point.
"""
from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from typing import Any, Iterable, Optional, Union

import numpy as np


class InvalidInputError(ValueError):
    """Raised for malformed matrices, index sets or parameters."""


class BudgetExceededError(RuntimeError):
    """Raised when an enumeration would exceed its configured budget."""


class NumericalError(RuntimeError):
    """Raised when an iterative numerical routine cannot produce a result."""


def as_matrix(A, name: str = "A") -> np.ndarray:
    """Return ``A`` as a finite 2-D float64 array (a copy only when needed)."""
    M = np.asarray(A, dtype=np.float64)
    if M.ndim == 1:
        M = M.reshape(1, -1)
    if M.ndim != 2:
        raise InvalidInputError(f"{name} must be 2-D, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise InvalidInputError(f"{name} has non-finite entries")
    return M


def as_vector(b, name: str = "b") -> np.ndarray:
    v = np.asarray(b, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(v)):
        raise InvalidInputError(f"{name} has non-finite entries")
    return v


def check_p(p: float, upper_open: bool = False) -> float:
    p = float(p)
    if not (1.0 <= p <= 2.0) or (upper_open and p >= 2.0):
        bound = "[1, 2)" if upper_open else "[1, 2]"
        raise InvalidInputError(f"p must lie in {bound}, got {p}")
    return p


def entrywise_norm(A, p: float) -> float:
    """(sum_ij |A_ij|^p)^(1/p)."""
    M = as_matrix(A)
    p = check_p(p)
    if M.size == 0:
        return 0.0
    if p == 1.0:
        return float(np.abs(M).sum())
    if p == 2.0:
        return float(np.linalg.norm(M.ravel()))
    # scale first so large entries do not overflow |x|^p
    scale = float(np.abs(M).max())
    if scale == 0.0:
        return 0.0
    return scale * float(np.sum(np.abs(M / scale) ** p)) ** (1.0 / p)


def entrywise_norm_pow(A, p: float) -> float:
    """sum_ij |A_ij|^p, i.e. the p-th power of :func:`entrywise_norm`."""
    return entrywise_norm(A, p) ** p


def column_norms(A, p: float) -> np.ndarray:
    M = as_matrix(A)
    return np.sum(np.abs(M) ** p, axis=0) ** (1.0 / p)


def norm_1p(A, p: float) -> float:
    """Sum over columns of each column's l_p norm."""
    M = as_matrix(A)
    p = check_p(p)
    if M.size == 0:
        return 0.0
    return float(column_norms(M, p).sum())


def column_index_set(indices: Iterable[int], ncols: int) -> np.ndarray:
    """Validated, sorted, duplicate-free column index array."""
    idx = np.asarray(list(indices), dtype=np.int64).reshape(-1)
    if idx.size and (idx.min() < 0 or idx.max() >= ncols):
        raise InvalidInputError(f"column index out of range for {ncols} columns")
    if idx.size != np.unique(idx).size:
        raise InvalidInputError("duplicate column indices")
    return np.sort(idx)


def select_columns(A, S: Iterable[int]) -> np.ndarray:
    M = as_matrix(A)
    idx = column_index_set(S, M.shape[1])
    return M[:, idx].copy()


def numerical_rank(A, rtol: float = 1e-9) -> int:
    M = as_matrix(A)
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.sum(s > rtol * s[0]))


def independent_columns(U, rtol: float = 1e-10) -> np.ndarray:
    """Indices of a maximal numerically independent subset of U's columns.

    Chosen by QR with column pivoting; returned in increasing order.
    """
    from scipy.linalg import qr

    M = as_matrix(U, "U")
    if M.shape[1] == 0 or not np.any(M):
        return np.zeros(0, dtype=np.int64)
    _, R, piv = qr(M, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    rank = int(np.sum(diag > rtol * diag[0]))
    return np.sort(piv[:rank])


def svd_truncate(A, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Rank-k truncated SVD as (left n x k, right k x d), singular values on the left."""
    M = as_matrix(A)
    u, s, vt = np.linalg.svd(M, full_matrices=False)
    k = min(k, s.size)
    return u[:, :k] * s[:k], vt[:k].copy()


class SeededRng:
    """Splittable deterministic random source.

    Each named child stream is an independent PCG64 generator keyed by the
    root seed and the path of stream names, so sub-algorithms never share
    state and results do not depend on call order across modules.
    """

    def __init__(self, seed: int = 0, path: tuple[int, ...] = ()):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.path = tuple(path)
        self._gen: Optional[np.random.Generator] = None

    def stream(self, name: str) -> "SeededRng":
        key = zlib.crc32(name.encode("utf-8"))
        return SeededRng(self.seed, self.path + (key,))

    @property
    def generator(self) -> np.random.Generator:
        if self._gen is None:
            ss = np.random.SeedSequence(self.seed, spawn_key=self.path)
            self._gen = np.random.Generator(np.random.PCG64(ss))
        return self._gen

    def __repr__(self) -> str:
        return f"SeededRng(seed={self.seed}, path={self.path})"


RngLike = Union[SeededRng, int, None]


def as_rng(rng: RngLike) -> SeededRng:
    if isinstance(rng, SeededRng):
        return rng
    return SeededRng(0 if rng is None else int(rng))


@dataclass(frozen=True)
class FactorPair:
    """A low-rank factorization ``left @ right`` and its achieved l_p error."""

    left: np.ndarray
    right: np.ndarray
    target_rank: int
    achieved_error_p: float
    algorithm_tag: str
    seed: int
    info: dict[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.left.shape[1] != self.right.shape[0]:
            raise InvalidInputError(
                f"inner dimensions differ: {self.left.shape} vs {self.right.shape}"
            )

    @property
    def product(self) -> np.ndarray:
        return self.left @ self.right

    @property
    def rank(self) -> int:
        return numerical_rank(self.product) if self.left.shape[1] else 0


def make_factor_pair(A, left, right, k: int, p: float, tag: str, seed: int,
                     **info) -> FactorPair:
    A = as_matrix(A)
    left = np.asarray(left, dtype=np.float64).reshape(A.shape[0], -1)
    right = np.asarray(right, dtype=np.float64).reshape(-1, A.shape[1])
    err = entrywise_norm(left @ right - A, p)
    return FactorPair(left, right, int(k), err, tag, int(seed), dict(info))
