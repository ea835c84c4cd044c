"""Discrete spectral calculus for the radial Laplace-Beltrami operator on H^n.

The operator -Delta = -(1/w)(w u')' with w = sinh^(n-1) is discretised by a
conservative three-point stencil on the nodes of a :class:`RadialGrid`. Node 0
follows node 1 (even extension, u'(0) = 0) and the last node is a homogeneous
Dirichlet wall, so the unknowns are nodes 1..N-2. With the lumped trapezoid
masses of the grid the stencil is symmetric, which gives an orthonormal
eigenbasis in the same inner product used by :func:`integrate_radial`.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.special import loggamma

from .geometry import RadialField, RadialGrid, StatePair, check_dim, integrate_radial, sphere_area

log = logging.getLogger(__name__)

LOW_RES_POINTS = 64


class SpectralError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class RadialStiffness:
    """Tridiagonal stiffness K and lumped mass m on the unknown nodes 1..N-2.

    ``K u = m * (-Delta u)`` for grid functions obeying the boundary closures.
    """

    grid: RadialGrid
    flux_weights: np.ndarray = field(init=False, repr=False)  # |S| sinh^(n-1)(r_{i+1/2}) / h
    mass: np.ndarray = field(init=False, repr=False)
    diag: np.ndarray = field(init=False, repr=False)
    offdiag: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        g = self.grid
        r = g.points
        sh = sphere_area(g.n) * np.sinh(r[:-1] + 0.5 * g.h) ** (g.n - 1) / g.h
        mass = sphere_area(g.n) * g.h * np.sinh(r[1:-1]) ** (g.n - 1)
        diag = sh[:-1] + sh[1:]
        if diag.size:
            diag[0] = sh[1]  # zero flux through r_{1/2} once u_0 = u_1
        off = -sh[1:-1]
        for name, val in (("flux_weights", sh), ("mass", mass), ("diag", diag), ("offdiag", off)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    def neg_laplacian(self, u: np.ndarray) -> np.ndarray:
        """-Delta u on the full grid; the closure nodes copy their neighbours."""
        u = np.asarray(u, dtype=float)
        flux = np.empty(u.size - 1)
        flux[:] = self.flux_weights * np.diff(u)
        flux[0] = 0.0
        flux[-1] = self.flux_weights[-1] * (0.0 - u[-2])
        out = np.empty_like(u)
        out[1:-1] = -(flux[1:] - flux[:-1]) / self.mass
        out[0] = out[1]
        out[-1] = 0.0
        return out

    def quadratic_form(self, u: np.ndarray) -> float:
        """u^T K u = int |grad u|^2 dmu for the closed grid function."""
        u = np.asarray(u, dtype=float)
        v = u[1:-1]
        Kv = self.diag * v
        Kv[:-1] += self.offdiag * v[1:]
        Kv[1:] += self.offdiag * v[:-1]
        return float(v @ Kv)


def close_boundary(u: np.ndarray) -> np.ndarray:
    """Impose the even extension at r = 0 and the Dirichlet wall at r_max."""
    u = np.array(u, dtype=float)
    u[0] = u[1]
    u[-1] = 0.0
    return u


@dataclass(frozen=True)
class SobolevIndex:
    sigma: float
    tau: float = 0.0

    def __post_init__(self):
        if not self.tau < 1.5:
            raise ValueError("tau must be < 3/2")


@dataclass(frozen=True, eq=False)
class SpectralOperator:
    grid: RadialGrid
    stiffness: RadialStiffness
    eigenvalues: np.ndarray  # clamped at rho^2
    raw_eigenvalues: np.ndarray
    vectors: np.ndarray  # orthonormal in the Euclidean sense (symmetrised problem)
    clamped: np.ndarray
    rho2: float
    low_resolution: bool

    @property
    def lam(self) -> np.ndarray:
        """Spectral parameter lambda_k = sqrt(mu_k - rho^2) >= 0."""
        return np.sqrt(self.eigenvalues - self.rho2)

    @property
    def size(self) -> int:
        return self.eigenvalues.size

    def coefficients(self, f) -> np.ndarray:
        """<f, e_k> in the dmu inner product."""
        v = f.values if isinstance(f, RadialField) else np.asarray(f, dtype=float)
        return self.vectors.T @ (np.sqrt(self.stiffness.mass) * v[1:-1])

    def synthesize(self, coeffs: np.ndarray) -> np.ndarray:
        interior = (self.vectors @ coeffs) / np.sqrt(self.stiffness.mass)
        out = np.zeros(self.grid.num_points)
        out[1:-1] = interior
        out[0] = out[1]
        return out

    def eigenfunction(self, k: int) -> RadialField:
        c = np.zeros(self.size)
        c[k] = 1.0
        return RadialField(self.grid, self.synthesize(c))

    def gram_defect(self) -> float:
        return float(np.max(np.abs(self.vectors.T @ self.vectors - np.eye(self.size))))


def build_spectral(grid: RadialGrid) -> SpectralOperator:
    """Full eigendecomposition of the discrete radial -Delta on ``grid``."""
    if grid.num_points < 3:
        raise SpectralError("need at least one interior node")
    K = RadialStiffness(grid)
    s = np.sqrt(K.mass)
    d = K.diag / K.mass
    e = K.offdiag / (s[:-1] * s[1:])
    try:
        mu, V = eigh_tridiagonal(d, e)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise SpectralError(f"eigensolver failed: {exc}") from exc
    rho2 = grid.rho ** 2
    clamped = mu < rho2
    if clamped.any():
        log.warning(
            "%d eigenvalue(s) below rho^2 = %g (min %.3e below); clamped",
            int(clamped.sum()), rho2, rho2 - mu.min(),
        )
    low = grid.num_points < LOW_RES_POINTS
    if low:
        log.warning("spectral operator on %d points is low resolution", grid.num_points)
    mu_c = np.maximum(mu, rho2)
    for a in (mu, mu_c, V, clamped):
        a.setflags(write=False)
    return SpectralOperator(grid, K, mu_c, mu, V, clamped, rho2, low)


def sobolev_norm(f: RadialField, idx: SobolevIndex, op: SpectralOperator) -> float:
    """||D^tau Dtilde^sigma f||_{L^2} with D^2 = -Delta - rho^2 and Dtilde^2 = -Delta + 1."""
    if f.grid is not op.grid:
        raise ValueError("field and operator live on different grids")
    c = op.coefficients(f)
    return math.sqrt(float(np.sum(_sobolev_multiplier(op, idx, c) * c**2)))


def _sobolev_multiplier(op: SpectralOperator, idx: SobolevIndex, c: np.ndarray) -> np.ndarray:
    shifted = op.eigenvalues - op.rho2
    if idx.tau < 0:
        bottom = shifted <= 0
        # round-off leakage into the bottom mode is not a genuine component
        if np.any(np.abs(c[bottom]) > 1e-12 * max(float(np.max(np.abs(c))), 1e-300)):
            raise SpectralError("norm undefined at discrete spectral bottom")
        shifted = np.where(bottom, 1.0, shifted)
    return shifted**idx.tau * (op.eigenvalues + 1.0) ** idx.sigma


def pair_norm(state: StatePair, sigma: float, op: SpectralOperator) -> float:
    """Norm of (u, u_t) in H^{sigma-1/2, 1/2} x H^{sigma-1/2, -1/2}."""
    a = sobolev_norm(state.u, SobolevIndex(sigma - 0.5, 0.5), op)
    b = sobolev_norm(state.ut, SobolevIndex(sigma - 0.5, -0.5), op)
    return math.hypot(a, b)


def propagate_coefficients(a: np.ndarray, b: np.ndarray, t: float, lam: np.ndarray):
    """Mode-wise free evolution of (u, u_t) coefficients over time t."""
    c, s = np.cos(t * lam), np.sin(t * lam)
    sinc = t * np.sinc(t * lam / np.pi)  # sin(t lam)/lam, equal to t at lam = 0
    return c * a + sinc * b, -lam * s * a + c * b


def linear_propagate(state: StatePair, t: float, op: SpectralOperator) -> StatePair:
    """Exact solution of the discrete linear shifted wave equation after time t."""
    if state.grid is not op.grid:
        raise ValueError("state and operator live on different grids")
    a, b = propagate_coefficients(op.coefficients(state.u), op.coefficients(state.ut), t, op.lam)
    return StatePair.from_arrays(op.grid, op.synthesize(a), op.synthesize(b), state.time + t)


def lq_norm(f: RadialField, q: float) -> float:
    if not q >= 1:
        raise ValueError(f"q must be >= 1, got {q}")
    return integrate_radial(RadialField(f.grid, np.abs(f.values) ** q)) ** (1.0 / q)


def harish_chandra_density(lam: float, n: int) -> float:
    """|Gamma(i lam + rho)|^2 / |Gamma(i lam)|^2, the Plancherel density up to a constant."""
    n = check_dim(n)
    lam = abs(float(lam))
    if lam == 0.0:
        return 0.0
    rho = (n - 1) / 2
    return math.exp(2.0 * (loggamma(complex(rho, lam)).real - loggamma(complex(0.0, lam)).real))


@dataclass(frozen=True)
class DensityGrowth:
    n: int
    sup_ratio: float
    inf_ratio_above_one: float


def density_growth_check(n: int, lam_max: float = 50.0, samples: int = 5001) -> DensityGrowth:
    """Compare the density with lam^2 (1 + lam)^(n-3) on (0, lam_max]."""
    lam = np.linspace(lam_max / samples, lam_max, samples)
    dens = np.array([harish_chandra_density(x, n) for x in lam])
    ratio = dens / (lam**2 * (1.0 + lam) ** (n - 3))
    return DensityGrowth(n, float(ratio.max()), float(ratio[lam >= 1.0].min()))
