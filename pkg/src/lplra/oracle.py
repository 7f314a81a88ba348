"""Reference instances and baselines: planted and hard instances, brute-force
upper bounds on the optimal rank-k error, and the truncated-SVD baseline."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import (RngLike, as_matrix, as_rng, check_p, entrywise_norm,
                   numerical_rank, svd_truncate)
from .simplex import linprog_simplex
from .solvers import best_left_factor, multi_response_regression

STALL_RTOL = 1e-10
STALL_ROUNDS = 3
MAX_ALTERNATIONS = 100


@dataclass(frozen=True)
class PlantedInstance:
    A: np.ndarray
    U_star: np.ndarray
    V_star: np.ndarray
    noise_norm_p: float
    p: float
    seed: int

    @property
    def k(self) -> int:
        return self.U_star.shape[1]

    def save(self, stem) -> None:
        from .io import write_matrix

        stem = Path(stem)
        write_matrix(stem.with_suffix(".mtx"), self.A)
        meta = {"seed": self.seed, "k": self.k, "p": self.p,
                "noise_norm_p": self.noise_norm_p}
        stem.with_suffix(".json").write_text(json.dumps(meta, sort_keys=True))


@dataclass(frozen=True)
class HardInstance:
    M: np.ndarray
    k: int
    n: int
    seed: int

    @property
    def opt_upper_bound_pow(self) -> float:
        """p-th power error of the rank-k matrix that keeps the Gaussian block."""
        return float(self.n)


def planted_instance(n: int, d: int, k: int, noise_scale: float, p: float,
                     rng: RngLike, noise: str = "gaussian",
                     density: float = 0.1) -> PlantedInstance:
    """A = U* V* + E with standard normal factors.

    ``noise="gaussian"`` adds noise_scale * N(0,1) to every entry;
    ``noise="sparse"`` adds noise_scale * N(0,1) * 10 to a random ``density``
    fraction of entries (outliers).
    """
    p = check_p(p)
    g = as_rng(rng)
    gen = g.stream("planted").generator
    U = gen.standard_normal((n, k))
    V = gen.standard_normal((k, d))
    L = U @ V
    if noise == "gaussian":
        E = noise_scale * gen.standard_normal((n, d))
    elif noise == "sparse":
        mask = gen.random((n, d)) < density
        E = np.where(mask, 10.0 * noise_scale * gen.standard_normal((n, d)), 0.0)
    else:
        raise ValueError(f"unknown noise model {noise!r}")
    A = L + E
    return PlantedInstance(A, U, V, entrywise_norm(A - L, p), p, g.seed)


def hard_instance(k: int, n: int, rng: RngLike) -> HardInstance:
    g = as_rng(rng)
    G = g.stream("hard").generator.standard_normal((k, n))
    return HardInstance(np.vstack([G, np.eye(n)]), int(k), int(n), g.seed)


def svd_baseline(A, k: int, p: float) -> float:
    A = as_matrix(A)
    if k <= 0:
        return entrywise_norm(A, p)
    L, R = svd_truncate(A, k)
    return entrywise_norm(A - L @ R, p)


def _alternate(A: np.ndarray, V: np.ndarray, p: float) -> float:
    best = np.inf
    stall = 0
    for _ in range(MAX_ALTERNATIONS):
        U = best_left_factor(V, A, p)
        V, costs = multi_response_regression(U, A, p)
        err = float(np.sum(costs ** p) ** (1.0 / p))
        if best - err < STALL_RTOL * max(best if np.isfinite(best) else err, 1e-300):
            stall += 1
        else:
            stall = 0
        best = min(best, err)
        if stall >= STALL_ROUNDS or best == 0.0:
            break
    return best


def _dual_norm(x: np.ndarray, p: float) -> float:
    if p == 1.0:
        return float(np.abs(x).max())
    q = p / (p - 1.0)
    return float(np.sum(np.abs(x) ** q) ** (1.0 / q))


def codim_one_opt(A, p: float, restarts: int = 10, rng: RngLike = 0) -> float:
    """min_x ||A x||_p / ||x||_{p*}, the optimal rank-(d-1) error.

    Exact for p = 1 (one LP per coordinate pinned to 1); for p > 1 a
    projected gradient search on the dual-norm sphere.
    """
    A = as_matrix(A)
    n, d = A.shape
    if p == 1.0:
        best = np.inf
        for j in range(d):
            # variables x+ (d), x- (d), t (n); x_j fixed through x+_j - x-_j = 1
            c = np.concatenate([np.zeros(2 * d), np.ones(n)])
            I = np.eye(n)
            A_ub = np.vstack([np.hstack([A, -A, -I]), np.hstack([-A, A, -I]),
                              np.hstack([np.eye(d), np.zeros((d, d + n))]),
                              np.hstack([np.zeros((d, d)), np.eye(d), np.zeros((d, n))])])
            b_ub = np.concatenate([np.zeros(2 * n), np.ones(2 * d)])
            A_eq = np.zeros((1, 2 * d + n))
            A_eq[0, j], A_eq[0, d + j] = 1.0, -1.0
            res = linprog_simplex(c, A_ub, b_ub, A_eq, [1.0])
            if res.success:
                x = res.x[:d] - res.x[d:2 * d]
                best = min(best, float(np.abs(A @ x).sum()) / _dual_norm(x, 1.0))
        return best
    gen = as_rng(rng).stream("codim").generator
    best = np.inf

    def ratio(x):
        return entrywise_norm((A @ x)[:, None], p) / _dual_norm(x, p)

    q = p / (p - 1.0)
    starts = [np.linalg.svd(A)[2][-1]] + [gen.standard_normal(d) for _ in range(max(restarts - 1, 0))]
    for x in starts:
        x = x / _dual_norm(x, p)
        f = ratio(x)
        step = 0.1
        for _ in range(300):
            Ax = A @ x
            nAx = max(entrywise_norm(Ax[:, None], p), 1e-300)
            grad = (A.T @ (np.sign(Ax) * np.abs(Ax) ** (p - 1.0))) * nAx ** (1.0 - p)
            # remove the radial part: the ratio is scale invariant
            dn = np.sign(x) * np.abs(x) ** (q - 1.0)
            grad = grad - (grad @ x) / max(dn @ x, 1e-300) * dn
            while step > 1e-12:
                y = x - step * grad
                y = y / _dual_norm(y, p)
                fy = ratio(y)
                if fy < f:
                    x, f = y, fy
                    step *= 1.5
                    break
                step *= 0.5
            else:
                break
        best = min(best, f)
    return best


def brute_force_opt(A, k: int, p: float, restarts: int = 50, rng: RngLike = 0) -> float:
    """Best rank-k l_p error found by alternating minimisation.

    This is an upper bound on the true optimum, not a certificate.
    """
    A = as_matrix(A)
    p = check_p(p)
    n, d = A.shape
    if k >= min(n, d):
        return 0.0
    if numerical_rank(A, 1e-12) <= k:
        return svd_baseline(A, k, p)
    g = as_rng(rng)
    gen = g.stream("brute").generator
    best = np.inf
    inits = [svd_truncate(A, k)[1]]
    inits += [gen.standard_normal((k, d)) for _ in range(max(restarts - 1, 0))]
    for V in inits:
        best = min(best, _alternate(A, V, p))
    if k == d - 1:
        best = min(best, codim_one_opt(A, p, restarts, g.stream("codim")))
    if k == n - 1:
        best = min(best, codim_one_opt(A.T, p, restarts, g.stream("codim-t")))
    return float(min(best, svd_baseline(A, k, p)))


def hardness_statistic(k: int, n: int, subsets: int, rng: RngLike,
                       p: float = 1.0) -> float:
    """min over random n/2-column subsets S of css_error(M, S)^p / n.

    Uses the structure of the hard instance: the identity rows outside S
    contribute exactly 1 per unselected column, so each column's cost is
    1 + min_x (||G_S x - g_j||_p^p + ||x||_p^p) in p-th power form.
    """
    g = as_rng(rng)
    inst = hard_instance(k, n, g)
    G = inst.M[:k]
    gen = g.stream("subsets").generator
    half = n // 2
    best = np.inf
    for _ in range(subsets):
        S = np.sort(gen.choice(n, size=half, replace=False))
        rest = np.setdiff1d(np.arange(n), S)
        design = np.vstack([G[:, S], np.eye(half)])
        target = np.vstack([G[:, rest], np.zeros((half, rest.size))])
        _, costs = multi_response_regression(design, target, p)
        total = float(np.sum(costs ** p)) + rest.size
        best = min(best, total / n)
    return best


def hardness_scan(ks, subsets: int = 200, seeds=range(10), p: float = 1.0,
                  n_factor: int = 2) -> dict[int, float]:
    """Median over seeds of :func:`hardness_statistic` for each k (n = n_factor * k)."""
    out = {}
    for k in ks:
        vals = [hardness_statistic(k, n_factor * k, subsets, s, p) for s in seeds]
        out[int(k)] = float(np.median(vals))
    return out
