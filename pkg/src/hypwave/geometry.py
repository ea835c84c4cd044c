"""Radial geometry of hyperbolic space H^n.

Points are described by the geodesic distance ``r`` to a fixed origin; the
volume element of a radial function integrates to
``|S^{n-1}| * sinh(r)^(n-1) dr``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

MIN_DIM = 2
MAX_DIM = 6
RECOMMENDED_POINTS = 16

# closed forms for a'(r) are used on this window; outside it the stable
# quadrature of (sinh s / sinh r)^(n-1) takes over
_CLOSED_FORM_WINDOW = (1.0, 50.0)

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(40)


def check_dim(n: int) -> int:
    if int(n) != n or not MIN_DIM <= n <= MAX_DIM:
        raise ValueError(f"dimension n must be an integer in [{MIN_DIM}, {MAX_DIM}], got {n!r}")
    return int(n)


def rho(n: int) -> float:
    """Half-dimension constant (n - 1)/2, the square root of the spectral bottom."""
    n = check_dim(n)
    return (n - 1) / 2


def sphere_area(n: int) -> float:
    """Surface measure of the unit sphere S^{n-1} in R^n."""
    return 2.0 * math.pi ** (n / 2) / math.gamma(n / 2)


@dataclass(frozen=True)
class HyperbolicParams:
    n: int
    rho: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "n", check_dim(self.n))
        object.__setattr__(self, "rho", (self.n - 1) / 2)


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Uniform grid r_0 = 0 < ... < r_{N-1} = r_max with trapezoid weights for dmu.

    ``weights`` already include the angular factor, so ``weights @ f`` is the
    integral of the radial function ``f`` over the geodesic ball of radius
    ``r_max``. Grids with fewer than 16 points are accepted but flagged
    ``low_resolution``.
    """

    n: int
    r_max: float
    num_points: int
    points: np.ndarray = field(init=False, repr=False)
    weights: np.ndarray = field(init=False, repr=False)
    h: float = field(init=False)
    low_resolution: bool = field(init=False)

    def __post_init__(self):
        n = check_dim(self.n)
        if not (self.r_max > 0 and math.isfinite(self.r_max)):
            raise ValueError("r_max must be positive and finite")
        N = int(self.num_points)
        if N != self.num_points or N < 2:
            raise ValueError("num_points must be an integer >= 2")
        r = np.linspace(0.0, float(self.r_max), N)
        h = float(self.r_max) / (N - 1)
        w = sphere_area(n) * h * np.sinh(r) ** (n - 1)
        w[0] *= 0.5
        w[-1] *= 0.5
        w[0] = 0.0  # sinh(0)^(n-1) = 0 exactly; avoid -0.0 noise
        r.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "num_points", N)
        object.__setattr__(self, "points", r)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "low_resolution", N < RECOMMENDED_POINTS)
        if N < RECOMMENDED_POINTS:
            log.warning("RadialGrid with %d points is below the recommended %d", N, RECOMMENDED_POINTS)

    @property
    def rho(self) -> float:
        return (self.n - 1) / 2

    def field(self, values) -> "RadialField":
        return RadialField(self, values)

    def sample(self, fn) -> "RadialField":
        return RadialField(self, fn(self.points))


@dataclass(frozen=True, eq=False)
class RadialField:
    grid: RadialGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.num_points,):
            raise ValueError(f"expected {self.grid.num_points} values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("RadialField values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __add__(self, other: "RadialField") -> "RadialField":
        _same_grid(self, other)
        return RadialField(self.grid, self.values + other.values)

    def __sub__(self, other: "RadialField") -> "RadialField":
        _same_grid(self, other)
        return RadialField(self.grid, self.values - other.values)

    def __mul__(self, c: float) -> "RadialField":
        return RadialField(self.grid, self.values * c)

    __rmul__ = __mul__


def _same_grid(a: RadialField, b: RadialField) -> None:
    if a.grid is not b.grid:
        raise ValueError("fields live on different grids")


def integrate_radial(f: RadialField) -> float:
    """Trapezoid quadrature of ``|S^{n-1}| * int f(r) sinh(r)^(n-1) dr`` on the grid."""
    return float(f.grid.weights @ f.values)


def _sinh_power_integral(k: int, r: float) -> float:
    """int_0^r sinh(s)^k ds by the reduction formula (k >= 0)."""
    if k == 0:
        return r
    if k == 1:
        return math.cosh(r) - 1.0
    sh, ch = math.sinh(r), math.cosh(r)
    return sh ** (k - 1) * ch / k - (k - 1) / k * _sinh_power_integral(k - 2, r)


def _grad_quadrature(r: float, k: int) -> float:
    # int_0^r (sinh s / sinh r)^k ds on panels of length <= 2 walking back from r;
    # the integrand is <= 1 and decays like e^{-k(r-s)}, so 60 units suffice
    log_sinh_r = math.log(math.sinh(r))
    total, hi = 0.0, r
    while hi > 0.0 and hi > r - 60.0:
        lo = max(0.0, hi - 2.0)
        nodes = 0.5 * (hi - lo) * (_GL_NODES + 1.0) + lo
        vals = np.exp(k * (np.log(np.sinh(nodes)) - log_sinh_r))
        total += 0.5 * (hi - lo) * float(_GL_WEIGHTS @ vals)
        hi = lo
    return total


def morawetz_weight_grad(r: float, n: int, method: str = "auto") -> float:
    """Radial derivative a'(r) of the Morawetz weight solving Delta a = 1 on H^n.

    ``a'(r) = sinh(r)^(1-n) * int_0^r sinh(s)^(n-1) ds``, bounded by 1/(2 rho).
    ``method`` is ``"auto"``, ``"closed"`` or ``"quadrature"``.
    """
    n = check_dim(n)
    r = float(r)
    if not r >= 0:
        raise ValueError(f"r must be nonnegative, got {r}")
    if r == 0.0:
        return 0.0
    k = n - 1
    if method == "auto":
        method = "closed" if _CLOSED_FORM_WINDOW[0] <= r <= _CLOSED_FORM_WINDOW[1] else "quadrature"
    if method == "closed":
        return _sinh_power_integral(k, r) / math.sinh(r) ** k
    if method == "quadrature":
        return _grad_quadrature(r, k)
    raise ValueError(f"unknown method {method!r}")


def morawetz_weight_second(r: float, n: int) -> float:
    """a''(r) from the defining ODE a'' + (n-1) coth(r) a' = 1; equals 1/n at r = 0."""
    n = check_dim(n)
    if r == 0.0:
        return 1.0 / n
    return 1.0 - (n - 1) * morawetz_weight_grad(r, n) / math.tanh(r)


@dataclass(frozen=True)
class HessianReport:
    passed: bool
    max_violation: float
    points_checked: int
    tol: float
    message: str = ""


def morawetz_weight_hessian_check(grid: RadialGrid, tol: float = 1e-10) -> HessianReport:
    """Check D^2 a >= 0 at every interior grid point.

    In polar coordinates the Hessian of a radial function is diagonal with the
    radial entry a'' and the angular entries a' coth(r).
    """
    interior = grid.points[1:-1]
    if interior.size == 0:
        return HessianReport(False, math.nan, 0, tol, "grid has no interior points")
    worst = 0.0
    for r in interior:
        second = morawetz_weight_second(r, grid.n)
        angular = morawetz_weight_grad(r, grid.n) / math.tanh(r)
        worst = max(worst, -second, -angular)
    return HessianReport(worst <= tol, max(worst, 0.0), int(interior.size), tol)


@dataclass(frozen=True, eq=False)
class StatePair:
    """Cauchy data (u, du/dt) at one time instant."""

    u: RadialField
    ut: RadialField
    time: float = 0.0

    def __post_init__(self):
        if self.u.grid is not self.ut.grid:
            raise ValueError("u and ut must share a grid")

    @property
    def grid(self) -> RadialGrid:
        return self.u.grid

    @classmethod
    def from_arrays(cls, grid: RadialGrid, u, ut, time: float = 0.0) -> "StatePair":
        return cls(RadialField(grid, u), RadialField(grid, ut), float(time))

    @classmethod
    def zeros(cls, grid: RadialGrid, time: float = 0.0) -> "StatePair":
        z = np.zeros(grid.num_points)
        return cls.from_arrays(grid, z, z, time)
