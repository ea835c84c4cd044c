"""Numerical checks of the weighted integral inequalities used in the decay argument.

All integrals are computed with composite Gauss-Legendre rules on panels that
are geometrically graded toward the (near-)singular endpoint. A value is only
accepted once halving every panel changes it by less than ``RTOL`` relative.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.special import gammaln

RTOL = 1e-8
GAUSS_ORDER = 12
LEMMAS = ("sphere", "two_factor", "three_factor")
# ratio slack for quadrature error when counting violations
RATIO_TOL = 1e-7


class LemmaError(ValueError):
    pass


class QuadratureError(RuntimeError):
    pass


@lru_cache(maxsize=None)
def _gauss(order: int):
    return np.polynomial.legendre.leggauss(order)


def graded_edges(a: float, b: float, scale: float, grading: float = 0.5) -> np.ndarray:
    """Panel edges on [a, b] shrinking geometrically toward ``a`` down to ~scale/100."""
    if not b > a:
        raise QuadratureError("empty interval")
    length = b - a
    stop = min(max(scale, 1e-300) * 1e-2, length)
    k = max(1, int(math.ceil(math.log(stop / length) / math.log(grading))))
    k = min(k, 2000)
    offs = length * grading ** np.arange(k, -1, -1)
    return np.concatenate([[a], a + offs])


def _composite(f: Callable[[np.ndarray], np.ndarray], edges: np.ndarray, order: int) -> float:
    x, w = _gauss(order)
    lo, hi = edges[:-1, None], edges[1:, None]
    half = 0.5 * (hi - lo)
    nodes = lo + half * (x + 1.0)
    return float(np.sum(half * w * f(nodes)))


@dataclass(frozen=True)
class Quadrature:
    value: float
    change: float  # |last - previous| after the final panel halving
    panels: int


def integrate(f, a: float, b: float, scale: float, rtol: float = RTOL, order: int = GAUSS_ORDER,
              max_halvings: int = 8) -> Quadrature:
    """Graded composite Gauss-Legendre with panel halving until self-consistent."""
    edges = graded_edges(a, b, scale)
    prev = _composite(f, edges, order)
    for _ in range(max_halvings):
        mids = 0.5 * (edges[:-1] + edges[1:])
        edges = np.sort(np.concatenate([edges, mids]))
        val = _composite(f, edges, order)
        change = abs(val - prev)
        if change <= rtol * abs(val) or val == prev:
            return Quadrature(val, change, edges.size - 1)
        prev = val
    raise QuadratureError(f"no convergence after {max_halvings} halvings (change {change:.3e})")


# --- circle lemma ---------------------------------------------------------------


def _check_sphere(x_abs, r, kappa):
    if not (x_abs > r > 0):
        raise LemmaError("need |x| > r > 0")
    if not kappa > 0:
        raise LemmaError("kappa must be positive")
    if kappa == 1:
        raise LemmaError("kappa = 1 is not covered")


def sphere_integral(x_abs: float, r: float, kappa: float) -> float:
    """Integral of |y|^(-kappa) over the circle |y - x| = r in R^2."""
    _check_sphere(x_abs, r, kappa)
    d = x_abs - r
    two_xr = 2.0 * x_abs * r

    def f(phi):
        # |y|^2 = d^2 + 2|x| r (1 - cos phi), phi measured from the point nearest 0
        s = np.sin(0.5 * phi)
        return (d * d + 2.0 * two_xr * s * s) ** (-0.5 * kappa)

    q = integrate(f, 0.0, math.pi, d / math.sqrt(x_abs * r))
    return 2.0 * r * q.value


def sphere_constant(kappa: float) -> float:
    """A constant C(kappa) that works in both branches, read off from the standard proof."""
    if kappa > 1:
        c = math.pi ** 1.5 * math.exp(gammaln((kappa - 1) / 2) - gammaln(kappa / 2)) / 2
    elif 0 < kappa < 1:
        c = 2.0 ** (1 - kappa) * math.pi / (1 - kappa)
    else:
        raise LemmaError("kappa must be positive and different from 1")
    return max(2.0 * math.pi, c)


def sphere_bound_shape(x_abs: float, r: float, kappa: float) -> float:
    """The min{...} factor of the bound, without C(kappa)."""
    _check_sphere(x_abs, r, kappa)
    d = x_abs - r
    near = r * d ** (-kappa)
    far = d ** (1 - kappa) if kappa > 1 else x_abs ** (1 - kappa)
    return min(far, near)


def sphere_bound_check(x_abs: float, r: float, kappa: float) -> tuple[float, float]:
    return sphere_integral(x_abs, r, kappa), sphere_constant(kappa) * sphere_bound_shape(x_abs, r, kappa)


@dataclass(frozen=True)
class ConstantFit:
    kappa: float
    fitted: float  # smallest constant that works on the sweep
    fitted_half: float  # same on every other sweep point
    proof_constant: float

    @property
    def stable(self) -> bool:
        return math.isfinite(self.fitted) and abs(self.fitted - self.fitted_half) <= 0.05 * self.fitted


def fit_sphere_constant(kappa: float, points: int = 40) -> ConstantFit:
    """Smallest C(kappa) over a log sweep of d/r and |x| with r = 1 (the ratio is scale invariant)."""
    ratios = []
    for g in np.logspace(-4, 4, points):
        x_abs = 1.0 + g
        ratios.append(sphere_integral(x_abs, 1.0, kappa) / sphere_bound_shape(x_abs, 1.0, kappa))
    ratios = np.array(ratios)
    return ConstantFit(kappa, float(ratios.max()), float(ratios[::2].max()), sphere_constant(kappa))


# --- one-dimensional two and three factor lemmas ---------------------------------


def _factor_integral(r1: float, k1: float, rest: list[tuple[float, float]]) -> float:
    """int_0^r1 (r1-r)^(-k1) prod (rj - r)^(-kj) dr with u = (r1 - r)^(1-k1)."""
    a = 1.0 - k1
    top = r1 ** a
    gap = min(rj - r1 for rj, _ in rest)

    def f(u):
        w = u ** (1.0 / a)  # r1 - r
        out = np.full_like(u, 1.0 / a)
        for rj, kj in rest:
            out = out * (rj - r1 + w) ** (-kj)
        return out

    scale = gap ** a if gap > 0 else top * 1e-12
    return integrate(f, 0.0, top, scale).value


def two_factor_bound_check(r1: float, r2: float, k1: float, k2: float) -> tuple[float, float]:
    if not (0 < r1 < r2):
        raise LemmaError("need 0 < r1 < r2")
    if not (0 < k1 < 1 and k2 > 0 and k1 + k2 > 1):
        raise LemmaError("need 0 < k1 < 1, k2 > 0 and k1 + k2 > 1")
    c = 1.0 / (1.0 - k1) + 1.0 / (k1 + k2 - 1.0)
    return _factor_integral(r1, k1, [(r2, k2)]), c * (r2 - r1) ** (1.0 - k1 - k2)


def three_factor_bound_check(r1: float, r2: float, r3: float, k1: float, k2: float, k3: float) -> tuple[float, float]:
    if not (0 < r1 < r2 <= r3):
        raise LemmaError("need 0 < r1 < r2 <= r3")
    if not (k1 > 0 and k2 > 0 and k3 > 0 and k1 + k2 < 1 and k1 + k2 + k3 > 1):
        raise LemmaError("need positive k with k1 + k2 < 1 < k1 + k2 + k3")
    c = 1.0 / (1.0 - k1 - k2) + 1.0 / (k1 + k2 + k3 - 1.0)
    return _factor_integral(r1, k1, [(r2, k2), (r3, k3)]), c * (r3 - r1) ** (1.0 - k1 - k2 - k3)


def two_factor_exact_half_one(r1: float, r2: float) -> float:
    """Closed form of the two-factor integral for k1 = 1/2, k2 = 1."""
    d = r2 - r1
    return 2.0 * math.atan(math.sqrt(r1 / d)) / math.sqrt(d)


# --- randomized harness ------------------------------------------------------------


@dataclass
class LemmaCheckReport:
    lemma_id: str
    samples: int
    seed: int
    max_ratio: float
    violations: int
    worst: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def to_dict(self) -> dict:
        return asdict(self)


def _log_uniform(rng, lo, hi):
    return float(math.exp(rng.uniform(math.log(lo), math.log(hi))))


def _draw(lemma_id: str, rng) -> tuple[dict, Callable[[], tuple[float, float]]]:
    if lemma_id == "sphere":
        kappa = float(rng.uniform(0.05, 3.0))
        if abs(kappa - 1.0) < 0.02:
            kappa += 0.04
        r = _log_uniform(rng, 1e-2, 1e2)
        x_abs = r * (1.0 + _log_uniform(rng, 1e-3, 1e3))
        args = dict(x_abs=x_abs, r=r, kappa=kappa)
        return args, lambda: sphere_bound_check(**args)
    if lemma_id == "two_factor":
        k1 = float(rng.uniform(0.02, 0.98))
        k2 = 1.0 - k1 + float(rng.uniform(0.02, 2.0))
        r1 = _log_uniform(rng, 1e-2, 1e2)
        r2 = r1 * (1.0 + _log_uniform(rng, 1e-3, 1e2))
        args = dict(r1=r1, r2=r2, k1=k1, k2=k2)
        return args, lambda: two_factor_bound_check(**args)
    if lemma_id == "three_factor":
        s = float(rng.uniform(0.04, 0.96))
        k1 = s * float(rng.uniform(0.05, 0.95))
        k2 = s - k1
        k3 = 1.0 - s + float(rng.uniform(0.02, 2.0))
        r1 = _log_uniform(rng, 1e-2, 1e2)
        r2 = r1 * (1.0 + _log_uniform(rng, 1e-3, 1e2))
        r3 = r2 if rng.uniform() < 0.1 else r2 + r1 * _log_uniform(rng, 1e-3, 1e2)
        args = dict(r1=r1, r2=r2, r3=r3, k1=k1, k2=k2, k3=k3)
        return args, lambda: three_factor_bound_check(**args)
    raise LemmaError(f"unknown lemma {lemma_id!r}; expected one of {LEMMAS}")


def randomized_check(lemma_id: str, samples: int, seed: int) -> LemmaCheckReport:
    """Draw parameters in the lemma's hypotheses and compare integral with the bound."""
    if lemma_id not in LEMMAS:
        raise LemmaError(f"unknown lemma {lemma_id!r}; expected one of {LEMMAS}")
    if samples < 1:
        raise LemmaError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    max_ratio, bad, worst = 0.0, 0, {}
    for _ in range(samples):
        args, run = _draw(lemma_id, rng)
        integral, bound = run()
        ratio = integral / bound
        if ratio > 1.0 + RATIO_TOL:
            bad += 1
        if ratio > max_ratio:
            max_ratio, worst = ratio, dict(args, integral=integral, bound=bound)
    return LemmaCheckReport(lemma_id, samples, seed, max_ratio, bad, worst)
