"""p-stable sketches and median estimators of entrywise l_p norms.

Standard p-stable variables here have characteristic function exp(-|t|^p),
so that sum_i x_i Z_i has the law of ||x||_p Z exactly.  At p = 2 this is
N(0, 2), not the unit normal.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .core import (InvalidInputError, NumericalError, RngLike, as_matrix,
                   as_rng, as_vector, check_p)


@dataclass(frozen=True)
class PStableSketch:
    matrix: np.ndarray
    p: float
    seed: int

    @property
    def rows(self) -> int:
        return self.matrix.shape[0]

    def apply(self, A) -> np.ndarray:
        return self.matrix @ as_matrix(A)


@dataclass(frozen=True)
class MedPConstant:
    p: float
    value: float
    quadrature_points: int


def _cms(p: float, u: np.ndarray, w: np.ndarray) -> np.ndarray:
    # Chambers-Mallows-Stuck with skewness 0
    if p == 1.0:
        return np.tan(u)
    a = np.sin(p * u) / np.cos(u) ** (1.0 / p)
    b = (np.cos((1.0 - p) * u) / w) ** ((1.0 - p) / p)
    return a * b


def p_stable_draws(p: float, size, rng: RngLike) -> np.ndarray:
    p = check_p(p)
    g = as_rng(rng).generator
    u = g.uniform(-math.pi / 2, math.pi / 2, size=size)
    w = g.standard_exponential(size=size)
    return _cms(p, u, w)


def sample_p_stable(p: float, rng: RngLike) -> float:
    """One standard p-stable draw."""
    return float(p_stable_draws(p, (), rng))


def p_stable_sketch(r: int, n: int, p: float, rng: RngLike) -> PStableSketch:
    if r < 1 or n < 0:
        raise InvalidInputError("sketch needs r >= 1 rows")
    g = as_rng(rng)
    return PStableSketch(p_stable_draws(p, (r, n), g), float(p), g.seed)


# -- med_p -----------------------------------------------------------------

_EDGE = 1e-6


def _log_g(theta: np.ndarray, p: float) -> np.ndarray:
    # log of (cos t / sin pt) * (cos((p-1)t) / cos t)^((p-1)/p)
    ct = np.cos(theta)
    return (np.log(ct) - np.log(np.sin(p * theta))
            + (p - 1.0) / p * (np.log(np.cos((p - 1.0) * theta)) - np.log(ct)))


def _integrand(theta: np.ndarray, m: float, p: float) -> np.ndarray:
    expo = p / (p - 1.0) * (math.log(m) + _log_g(theta, p))
    return np.exp(-np.exp(np.minimum(expo, 700.0)))


def _simpson(f, a: float, b: float, n: int) -> float:
    x = np.linspace(a, b, n + 1)
    y = f(x)
    h = (b - a) / n
    return h / 3.0 * (y[0] + y[-1] + 4.0 * y[1:-1:2].sum() + 2.0 * y[2:-1:2].sum())


def _crossing(m: float, p: float) -> float:
    """Angle where m*g(theta) = 1, i.e. the centre of the integrand's step."""
    lo, hi = _EDGE, math.pi / 2 - _EDGE
    target = -math.log(m)
    if _log_g(np.array(lo), p) <= target:
        return lo
    if _log_g(np.array(hi), p) >= target:
        return hi
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if _log_g(np.array(mid), p) > target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def nolan_integral(m: float, p: float, tol: float = 1e-6, start_points: int = 64,
                   max_points: int = 1 << 22) -> tuple[float, int]:
    """Integral over (0, pi/2) of exp(-m^(p/(p-1)) V(theta; p)).

    Composite Simpson on each side of the integrand's transition angle,
    doubling the resolution until successive estimates differ by < tol.
    Returns (value, points used).
    """
    if m <= 0:
        return math.pi / 2 - 2 * _EDGE, 0
    t0 = _crossing(m, p)
    pieces = [(a, b) for a, b in ((_EDGE, t0), (t0, math.pi / 2 - _EDGE)) if b > a]
    total, used = 0.0, 0
    f = lambda th: _integrand(th, m, p)
    for a, b in pieces:
        n = start_points
        prev = cur = _simpson(f, a, b, n)
        while True:
            n *= 2
            if n > max_points:
                raise NumericalError(
                    f"quadrature did not settle for p={p}, m={m}: last change "
                    f"{abs(cur - prev):.3g} at {n // 2} points")
            cur = _simpson(f, a, b, n)
            if abs(cur - prev) < tol:
                break
            prev = cur
        total += cur
        used += n + 1
    return total, used


@lru_cache(maxsize=None)
def _med_p_cached(p: float, tol: float, start_points: int, xtol: float) -> MedPConstant:
    if p == 1.0:
        return MedPConstant(1.0, 1.0, 0)
    target = math.pi / 4
    lo, hi = 0.0, 2.0
    while nolan_integral(hi, p, tol, start_points)[0] > target:
        lo, hi = hi, 2.0 * hi
    points = 0
    while hi - lo > xtol:
        mid = 0.5 * (lo + hi)
        val, pts = nolan_integral(mid, p, tol, start_points)
        points = max(points, pts)
        if val > target:
            lo = mid
        else:
            hi = mid
    return MedPConstant(p, 0.5 * (lo + hi), points)


def med_p(p: float, tol: float = 1e-6, start_points: int = 64,
          xtol: float = 1e-9) -> MedPConstant:
    """Median of |Z| for a standard p-stable Z.

    Solves P(|Z| <= m) = 1/2, which is the point where the Nolan integral
    equals pi/4.  Results are cached per (p, settings).
    """
    p = check_p(p)
    return _med_p_cached(p, float(tol), int(start_points), float(xtol))


# -- medians and quantiles ---------------------------------------------------

def quantile_abs(v, alpha: float, axis: int | None = None):
    """The ceil(alpha*n)-th smallest absolute value (along ``axis`` if given)."""
    if not (0.0 < alpha <= 1.0):
        raise InvalidInputError("alpha must lie in (0, 1]")
    if axis is None:
        a = np.abs(as_vector(v, "v"))
        if a.size == 0:
            raise InvalidInputError("quantile of an empty vector")
        h = max(1, math.ceil(alpha * a.size))
        return float(np.partition(a, h - 1)[h - 1])
    a = np.abs(np.asarray(v, dtype=np.float64))
    n = a.shape[axis]
    if n == 0:
        raise InvalidInputError("quantile of an empty vector")
    h = max(1, math.ceil(alpha * n))
    return np.take(np.partition(a, h - 1, axis=axis), h - 1, axis=axis)


def median_abs(v, axis: int | None = None):
    return quantile_abs(v, 0.5, axis=axis)


def median_sketch_cost(M, medp: MedPConstant, p: float) -> float:
    """(sum over columns of med(M_i)^p)^(1/p) / med_p."""
    M = as_matrix(M, "M")
    p = check_p(p)
    if M.shape[1] == 0:
        return 0.0
    meds = median_abs(M, axis=0)
    return float(np.sum(meds ** p) ** (1.0 / p) / medp.value)


def quantile_sketch_cost(M, alpha: float, medp: MedPConstant, p: float) -> float:
    M = as_matrix(M, "M")
    if M.shape[1] == 0:
        return 0.0
    q = quantile_abs(M, alpha, axis=0)
    return float(np.sum(q ** p) ** (1.0 / p) / medp.value)


# -- empirical property checks (used by tests and the sketch-check command) --

def _sketch(r: int, n: int, p: float, rng) -> np.ndarray:
    return p_stable_draws(p, (r, n), rng)


def check_median_preserves_norm(A, p: float, r: int, draws: int, rng: RngLike,
                                rel_tol: float = 0.1) -> int:
    """Number of sketches whose median estimate is within rel_tol of ||A||_p."""
    A = as_matrix(A)
    g = as_rng(rng)
    mp = med_p(p)
    true = float(np.sum(np.abs(A) ** p) ** (1.0 / p))
    ok = 0
    for t in range(draws):
        est = median_sketch_cost(_sketch(r, A.shape[0], p, g.stream(f"mpn-{t}")) @ A, mp, p)
        ok += abs(est - true) <= rel_tol * true
    return ok


def check_one_sided(U, A, p: float, r: int, n_right: int, draws: int, rng: RngLike,
                    frac: float = 0.8) -> int:
    """Sketches under which every one of n_right random UV - A keeps >= frac of its cost."""
    U, A = as_matrix(U, "U"), as_matrix(A)
    g = as_rng(rng)
    mp = med_p(p)
    Vs = g.stream("one-sided-V").generator.standard_normal((n_right, U.shape[1], A.shape[1]))
    ok = 0
    for t in range(draws):
        S = _sketch(r, A.shape[0], p, g.stream(f"os-{t}"))
        SU, SA = S @ U, S @ A
        good = True
        for V in Vs:
            true = float(np.sum(np.abs(U @ V - A) ** p) ** (1.0 / p))
            if median_sketch_cost(SU @ V - SA, mp, p) < frac * true:
                good = False
                break
        ok += good
    return ok


def check_top_quantile(M, p: float, r: int, eps: float, draws: int, rng: RngLike,
                       factor: float = 10.0) -> int:
    """Sketches with quantile-(1-eps/2) estimate at most (factor/eps) ||M||_p."""
    M = as_matrix(M, "M")
    g = as_rng(rng)
    mp = med_p(p)
    true = float(np.sum(np.abs(M) ** p) ** (1.0 / p))
    ok = 0
    for t in range(draws):
        est = quantile_sketch_cost(_sketch(r, M.shape[0], p, g.stream(f"tq-{t}")) @ M,
                                   1.0 - eps / 2.0, mp, p)
        ok += est <= factor / eps * true
    return ok


def check_distortion(M, p: float, r: int, draws: int, rng: RngLike,
                     factor: float = 20.0) -> int:
    """Sketches with ||SM||_p^p <= factor * r log(d+1) ||M||_p^p."""
    M = as_matrix(M, "M")
    g = as_rng(rng)
    true_pow = float(np.sum(np.abs(M) ** p))
    bound = factor * r * math.log(M.shape[1] + 1) * true_pow
    ok = 0
    for t in range(draws):
        SM = _sketch(r, M.shape[0], p, g.stream(f"dist-{t}")) @ M
        ok += float(np.sum(np.abs(SM) ** p)) <= bound
    return ok


def sketch_property_suite(rng: RngLike = 0, p: float = 1.0, draws: int = 10) -> dict:
    """Run each sketch property once at small scale; returns per-check counts."""
    g = as_rng(rng)
    gen = g.stream("suite-data").generator
    A = gen.standard_normal((50, 20))
    U = gen.standard_normal((100, 2))
    B = gen.standard_normal((100, 20))
    M = gen.standard_normal((100, 20))
    need = math.ceil(0.9 * draws)
    checks = {
        "median_preserves_norm": check_median_preserves_norm(A, p, 2000, draws, g.stream("a")),
        "one_sided_embedding": check_one_sided(U, B, p, 3000, 50, draws, g.stream("b")),
        "top_quantile_dilation": check_top_quantile(M, p, 400, 0.2, draws, g.stream("c")),
        "lp_distortion": check_distortion(M, p, 400, draws, g.stream("d")),
    }
    grid = np.linspace(1.0, 1.99, 12)
    cont = all(abs(med_p(float(x)).value - med_p(float(x) + 1e-3).value) <= 1e-2 for x in grid)
    out = {name: {"passes": int(v), "draws": draws, "required": need, "passed": v >= need}
           for name, v in checks.items()}
    out["med_p_continuity"] = {"passes": int(cont), "draws": 1, "required": 1, "passed": cont}
    return out
