"""Radial defocusing quintic wave equation on R^2.

    u_tt - Delta u = -|u|^4 u,   Delta u = u_rr + u_r / r

The solver uses the same conservative finite-volume stencil as the
hyperbolic module, now with flat weights r dr and a centre cell of area
pi (h/2)^2, which reproduces the regularised Laplacian 2 u_rr at r = 0.
Runs are made in both time directions so that later analysis (light-cone
transform, decay fits) can sample a full space-time slab.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import RectBivariateSpline

log = logging.getLogger(__name__)


class EuclideanError(ValueError):
    pass


# --- data ----------------------------------------------------------------


@dataclass(frozen=True)
class DecayProfile:
    """Decay class of the data: |u0| <= A(1+r)^(-1/2-eps), |u0'|, |u1| <= A(1+r)^(-3/2-eps)."""

    A: float = 1.0
    eps: float = 0.5
    R: float = 1.0
    delta: Optional[float] = None

    def __post_init__(self):
        if not (self.A > 0 and self.eps > 0 and self.R > 0):
            raise EuclideanError("A, eps and R must be positive")
        d = self.delta if self.delta is not None else default_delta(self.eps)
        if not 0 < d < min(self.eps, 0.1):
            raise EuclideanError(f"delta must lie in (0, min(eps, 1/10)), got {d}")
        object.__setattr__(self, "delta", float(d))

    def envelope(self, r, extra: float = 0.0):
        return self.A * (1.0 + np.asarray(r, dtype=float)) ** (-0.5 - self.eps - extra)


def default_delta(eps: float) -> float:
    return 0.5 * min(eps, 0.1)


def smooth_step(x):
    """C-infinity step: 0 for x <= 0, 1 for x >= 1."""
    x = np.asarray(x, dtype=float)

    def psi(y):
        out = np.zeros_like(y)
        pos = y > 0
        out[pos] = np.exp(-1.0 / y[pos])
        return out

    a, b = psi(x), psi(1.0 - x)
    return a / (a + b)


def smooth_step_prime(x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    m = (x > 0) & (x < 1)
    y = x[m]
    a, b = np.exp(-1.0 / y), np.exp(-1.0 / (1.0 - y))
    da, db = a / y**2, -b / (1.0 - y) ** 2
    out[m] = (da * (a + b) - a * (da + db)) / (a + b) ** 2
    return out


@dataclass(frozen=True)
class DecayingData:
    """Radial data in the decay class of ``prof``, switched off smoothly on [r_cut, 2 r_cut].

    u0 = c0 (1+r^2)^(-(1/2+eps)/2) chi(r), u1 = c1 (1+r^2)^(-(3/2+eps)/2) chi(r),
    with c0 and c1 picked so that the three pointwise bounds hold with
    ``safety`` room. The amplitude ``A`` enters linearly.
    """

    prof: DecayProfile
    r_cut: float = 20.0
    safety: float = 0.9
    with_velocity: bool = True
    c0: float = field(init=False)
    c1: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "c0", 1.0)
        object.__setattr__(self, "c1", 1.0 if self.with_velocity else 0.0)
        r = np.linspace(0.0, 2.0 * self.r_cut, 20001)
        lo = self.prof.envelope(r)
        hi = self.prof.envelope(r, 1.0)
        k0 = max(np.max(np.abs(self.u0(r)) / lo), np.max(np.abs(self.u0_prime(r)) / hi))
        object.__setattr__(self, "c0", self.safety / k0)
        if self.with_velocity:
            k1 = np.max(np.abs(self.u1(r)) / hi)
            object.__setattr__(self, "c1", self.safety / k1)

    @property
    def support(self) -> float:
        return 2.0 * self.r_cut

    def _chi(self, r):
        return 1.0 - smooth_step(np.asarray(r) / self.r_cut - 1.0)

    def _chi_prime(self, r):
        return -smooth_step_prime(np.asarray(r) / self.r_cut - 1.0) / self.r_cut

    def u0(self, r):
        r = np.asarray(r, dtype=float)
        a = 0.5 + self.prof.eps
        return self.prof.A * self.c0 * (1 + r * r) ** (-a / 2) * self._chi(r)

    def u0_prime(self, r):
        r = np.asarray(r, dtype=float)
        a = 0.5 + self.prof.eps
        base = (1 + r * r) ** (-a / 2)
        dbase = -a * r * (1 + r * r) ** (-a / 2 - 1)
        return self.prof.A * self.c0 * (dbase * self._chi(r) + base * self._chi_prime(r))

    def u1(self, r):
        r = np.asarray(r, dtype=float)
        a = 1.5 + self.prof.eps
        return self.prof.A * self.c1 * (1 + r * r) ** (-a / 2) * self._chi(r)

    def check_bounds(self, r) -> bool:
        r = np.asarray(r, dtype=float)
        lo, hi = self.prof.envelope(r), self.prof.envelope(r, 1.0)
        return bool(
            np.all(np.abs(self.u0(r)) <= lo * (1 + 1e-12))
            and np.all(np.abs(self.u0_prime(r)) <= hi * (1 + 1e-12))
            and np.all(np.abs(self.u1(r)) <= hi * (1 + 1e-12))
        )


def _bump2d(rho):
    out = np.zeros_like(rho)
    m = rho < 1
    out[m] = np.exp(-1.0 / (1.0 - rho[m] ** 2))
    return out


_BUMP_MASS = None


def mollify(f: Callable, lam: float, r, n_rho: int = 32, n_theta: int = 64) -> np.ndarray:
    """(phi_lam * f)(r) for radial f on R^2, phi_lam(z) = lam^-2 phi(z/lam) with unit mass."""
    global _BUMP_MASS
    rho, w_rho = np.polynomial.legendre.leggauss(n_rho)
    rho = 0.5 * (rho + 1.0)
    w_rho = 0.5 * w_rho
    if _BUMP_MASS is None:
        _BUMP_MASS = 2 * math.pi * float(np.sum(w_rho * _bump2d(rho) * rho))
    th = 2 * math.pi * np.arange(n_theta) / n_theta
    r = np.atleast_1d(np.asarray(r, dtype=float))
    out = np.empty_like(r)
    kern = w_rho * _bump2d(rho) * rho / _BUMP_MASS * (2 * math.pi / n_theta)
    for i, ri in enumerate(r):
        R, T = np.meshgrid(lam * rho, th, indexing="ij")
        dist = np.sqrt(ri**2 + R**2 + 2 * ri * R * np.cos(T))
        out[i] = float(np.sum(kern[:, None] * f(dist)))
    return out


# --- solver --------------------------------------------------------------


@dataclass(frozen=True)
class EuclideanGrid:
    r_max: float
    num_points: int
    points: np.ndarray = field(init=False, repr=False)
    h: float = field(init=False)
    mass: np.ndarray = field(init=False, repr=False)  # 2 pi * cell areas / 2 pi, i.e. int r dr per cell
    flux: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        N = int(self.num_points)
        if N < 4 or not self.r_max > 0:
            raise EuclideanError("need r_max > 0 and at least 4 points")
        r = np.linspace(0.0, self.r_max, N)
        h = self.r_max / (N - 1)
        mass = r * h
        mass[0] = h * h / 8.0
        mass[-1] = 0.5 * r[-1] * h
        flux = (r[:-1] + 0.5 * h) / h
        for a in (r, mass, flux):
            a.setflags(write=False)
        object.__setattr__(self, "num_points", N)
        object.__setattr__(self, "points", r)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "mass", mass)
        object.__setattr__(self, "flux", flux)

    def laplacian(self, u: np.ndarray) -> np.ndarray:
        F = self.flux * np.diff(u)
        out = np.zeros_like(u)
        out[0] = F[0] / self.mass[0]
        out[1:-1] = (F[1:] - F[:-1]) / self.mass[1:-1]
        return out

    def integrate(self, f: np.ndarray) -> float:
        """2 pi int f r dr (centre-cell and trapezoid weights)."""
        return 2.0 * math.pi * float(self.mass @ f)


@dataclass
class EuclideanState:
    grid: EuclideanGrid
    u: np.ndarray
    ut: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        self.ut = np.asarray(self.ut, dtype=float)
        if self.u.shape != (self.grid.num_points,) or self.ut.shape != self.u.shape:
            raise EuclideanError("field shape does not match the grid")
        if not (np.all(np.isfinite(self.u)) and np.all(np.isfinite(self.ut))):
            raise EuclideanError("state values must be finite")


def energy_2d(state: EuclideanState) -> float:
    """int (1/2 u_t^2 + 1/2 |grad u|^2 + 1/6 u^6) dx in the solver's discrete form."""
    g = state.grid
    grad = float(g.flux @ np.diff(state.u) ** 2)
    return 2.0 * math.pi * (0.5 * grad) + g.integrate(0.5 * state.ut**2 + state.u**6 / 6.0)


@dataclass(frozen=True)
class QuinticConfig:
    r_max: float
    num_points: int
    t_final: float
    t_backward: float = 0.0
    dt_ratio: float = 0.5
    nonlinear: bool = True
    store_every: int = 2
    blowup_threshold: float = 1e8

    def __post_init__(self):
        if not 0 < self.dt_ratio <= 0.5:
            raise EuclideanError("dt must satisfy dt <= h/2")
        if self.t_final < 0 or self.t_backward < 0:
            raise EuclideanError("time spans must be nonnegative")
        if self.store_every < 1:
            raise EuclideanError("store_every must be >= 1")


@dataclass
class EuclideanTrajectory:
    """Stored space-time slab (t ascending) plus per-step diagnostics."""

    grid: EuclideanGrid
    times: np.ndarray
    U: np.ndarray
    UT: np.ndarray
    series_t: np.ndarray
    series_energy: np.ndarray
    l6l6_acc: np.ndarray
    valid_support: float = math.inf
    status: str = "completed"

    @property
    def r(self):
        return self.grid.points

    def state(self, k: int) -> EuclideanState:
        return EuclideanState(self.grid, self.U[k], self.UT[k], float(self.times[k]))

    def r_valid(self, t) -> np.ndarray:
        """Radii that no reflection from the outer wall can reach by time t."""
        t = np.abs(t)
        if math.isfinite(self.valid_support):
            return 2 * self.grid.r_max - self.valid_support - t
        return self.grid.r_max - t

    def interpolant(self) -> "SpaceTimeSpline":
        return SpaceTimeSpline(self)

    def write_series_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("t", "energy", "l6l6_acc"))
            for row in zip(self.series_t, self.series_energy, self.l6l6_acc):
                w.writerow([repr(float(x)) for x in row])


def _quintic_run(grid, u, ut, steps, dt, cfg, sign):
    nonlin = cfg.nonlinear

    def accel(x):
        a = grid.laplacian(x)
        if nonlin:
            a -= x**5
        a[-1] = 0.0
        return a

    E = np.empty(steps + 1)
    L6 = np.empty(steps + 1)
    stored_u, stored_ut = [u.copy()], [sign * ut]
    E[0] = energy_2d(EuclideanState(grid, u, ut))
    L6[0] = grid.integrate(u**6)
    a = accel(u)
    status = "completed"
    last = steps
    for i in range(1, steps + 1):
        uth = ut + 0.5 * dt * a
        u = u + dt * uth
        u[-1] = 0.0
        a = accel(u)
        ut = uth + 0.5 * dt * a
        if not np.all(np.isfinite(u)) or np.max(np.abs(u)) > cfg.blowup_threshold:
            status, last = "blowup_detected", i - 1
            break
        E[i] = energy_2d(EuclideanState(grid, u, ut))
        L6[i] = grid.integrate(u**6)
        if i % cfg.store_every == 0:
            stored_u.append(u.copy())
            stored_ut.append(sign * ut)
    return np.array(stored_u), np.array(stored_ut), E[: last + 1], L6[: last + 1], status


def simulate_quintic(cfg: QuinticConfig, u0: Callable, u1: Callable, support: float = math.inf) -> EuclideanTrajectory:
    """Leapfrog run on [-t_backward, t_final]; ``support`` is the data radius used for validity checks."""
    grid = EuclideanGrid(cfg.r_max, cfg.num_points)
    if math.isfinite(support) and support + max(cfg.t_final, cfg.t_backward) >= cfg.r_max:
        raise EuclideanError("r_max must exceed the data support plus the simulated time span")
    dt = cfg.dt_ratio * grid.h
    stride_t = cfg.store_every * dt
    nf = int(round(cfg.t_final / stride_t)) * cfg.store_every
    nb = int(round(cfg.t_backward / stride_t)) * cfg.store_every
    u = np.asarray(u0(grid.points), dtype=float).copy()
    v = np.zeros_like(u) if u1 is None else np.asarray(u1(grid.points), dtype=float).copy()
    u[-1] = v[-1] = 0.0
    Uf, UTf, Ef, Lf, sf = _quintic_run(grid, u, v, nf, dt, cfg, 1)
    Ub, UTb, Eb, Lb, sb = _quintic_run(grid, u, -v, nb, dt, cfg, -1)
    kf, kb = len(Uf), len(Ub)
    times = np.concatenate([-stride_t * np.arange(kb - 1, 0, -1), stride_t * np.arange(kf)])
    U = np.concatenate([Ub[:0:-1], Uf])
    UT = np.concatenate([UTb[:0:-1], UTf])
    st = np.concatenate([-dt * np.arange(len(Eb) - 1, 0, -1), dt * np.arange(len(Ef))])
    energy = np.concatenate([Eb[:0:-1], Ef])
    # trapezoid accumulation of int |u|^6 dx dt starting from the earliest time
    L6 = np.concatenate([Lb[:0:-1], Lf])
    acc = np.concatenate([[0.0], np.cumsum(0.5 * dt * (L6[1:] + L6[:-1]))])
    status = "completed" if sf == sb == "completed" else "blowup_detected"
    return EuclideanTrajectory(grid, times, U, UT, st, energy, acc, support, status)


# --- interpolation ---------------------------------------------------------


class SpaceTimeSpline:
    """Bicubic splines of u and u_t over the stored (t, r) slab."""

    def __init__(self, traj: EuclideanTrajectory):
        self.traj = traj
        self._u = RectBivariateSpline(traj.times, traj.r, traj.U, kx=3, ky=3)
        self._ut = RectBivariateSpline(traj.times, traj.r, traj.UT, kx=3, ky=3)
        self.t_range = (float(traj.times[0]), float(traj.times[-1]))

    def check(self, r, t) -> None:
        r, t = np.asarray(r), np.asarray(t)
        if np.any(t < self.t_range[0] - 1e-12) or np.any(t > self.t_range[1] + 1e-12):
            raise EuclideanError("sample time outside the simulated slab")
        if np.any(r < 0) or np.any(r > np.minimum(self.traj.grid.r_max, self.traj.r_valid(t))):
            raise EuclideanError("sample radius outside the simulated region")

    def u(self, r, t):
        return self._u.ev(t, r)

    def u_r(self, r, t):
        return self._u.ev(t, r, dy=1)

    def u_t(self, r, t):
        return self._ut.ev(t, r)


# --- linear representation -------------------------------------------------


def _num_deriv(f, r, h=1e-6):
    return (f(r + h) - f(r - h)) / (2 * h)


def _ball_average(x_abs, T, integrand, n_phi, n_theta):
    # int_0^{2pi} int_0^{pi/2} integrand(y) * T sin(phi) dphi dtheta, with |y - x| = T sin(phi)
    phi, wphi = np.polynomial.legendre.leggauss(n_phi)
    phi = 0.25 * math.pi * (phi + 1.0)
    wphi = 0.25 * math.pi * wphi
    th = 2 * math.pi * (np.arange(n_theta) + 0.5) / n_theta
    P, Th = np.meshgrid(phi, th, indexing="ij")
    rho = T * np.sin(P)
    dx, dy = rho * np.cos(Th), rho * np.sin(Th)
    yx, yy = x_abs + dx, dy
    val = integrand(yx, yy, dx, dy)
    return float(np.sum(wphi[:, None] * val * rho) * (2 * math.pi / n_theta))


def linear_representation(
    u0: Optional[Callable],
    u1: Optional[Callable],
    F: Optional[Callable],
    x_abs: float,
    t: float,
    u0_prime: Optional[Callable] = None,
    tol: float = 1e-8,
    max_level: int = 8,
) -> float:
    """Solution of u_tt - Delta u = F on R^2 at (x, t) from the explicit kernel.

    ``u0``, ``u1`` are radial profiles of |y|; ``F(y_abs, s)`` is a radial
    source. The inverse square-root edge of the kernel is removed by writing
    |y - x| = t sin(phi); the rule is refined until two levels agree to ``tol``.
    """
    if not t > 0:
        raise EuclideanError("t must be positive")
    zero = lambda r: np.zeros_like(r)  # noqa: E731
    u0 = u0 or zero
    u1 = u1 or zero
    du0 = u0_prime or (lambda r: _num_deriv(u0, r))

    def homogeneous(n_phi, n_theta):
        def integ(yx, yy, dx, dy):
            ya = np.hypot(yx, yy)
            safe = np.where(ya > 0, ya, 1.0)
            g = du0(ya) / safe
            return t * u0(ya) + t * t * u1(ya) + t * g * (yx * dx + yy * dy)

        return _ball_average(x_abs, t, integ, n_phi, n_theta) / (2 * math.pi * t * t)

    def duhamel(n_phi, n_theta, n_s):
        if F is None:
            return 0.0
        s, ws = np.polynomial.legendre.leggauss(n_s)
        s = 0.5 * t * (s + 1.0)
        ws = 0.5 * t * ws
        total = 0.0
        for si, wi in zip(s, ws):
            T = t - si

            def integ(yx, yy, dx, dy, si=si):
                return F(np.hypot(yx, yy), si)

            total += wi * _ball_average(x_abs, T, integ, n_phi, n_theta) / (2 * math.pi)
        return total

    prev = None
    n_phi, n_theta, n_s = 16, 32, 8
    for _ in range(max_level):
        val = homogeneous(n_phi, n_theta) + duhamel(n_phi, n_theta, n_s)
        if prev is not None and abs(val - prev) <= tol * max(1.0, abs(val)):
            return val
        prev = val
        n_phi, n_theta, n_s = 2 * n_phi, 2 * n_theta, 2 * n_s
    raise EuclideanError(f"kernel quadrature did not converge (last change {abs(val - prev):.3e})")


# --- decay diagnostics -----------------------------------------------------


@dataclass(frozen=True)
class DecayReport:
    constant: float
    samples: int
    R: float
    delta: float
    stable: Optional[bool] = None
    relative_change: Optional[float] = None


def _exterior(traj: EuclideanTrajectory, R: float, t_min: float = 0.0):
    T, Rr = np.meshgrid(traj.times, traj.r, indexing="ij")
    valid = Rr <= traj.r_valid(T)
    mask = (T >= t_min) & (Rr > T + R) & valid & (Rr > 0)
    return T, Rr, mask


def decay_check(traj: EuclideanTrajectory, prof: DecayProfile, reference: Optional[EuclideanTrajectory] = None,
                rel_tol: float = 0.2) -> DecayReport:
    """Fitted B1 = sup |u| r^(1/2) (r - t)^delta over r > t + R, t >= 0."""
    T, Rr, mask = _exterior(traj, prof.R)
    if not mask.any():
        raise EuclideanError("no samples in the exterior region")
    vals = np.abs(traj.U[mask]) * np.sqrt(Rr[mask]) * (Rr[mask] - T[mask]) ** prof.delta
    c = float(vals.max())
    rep = DecayReport(c, int(mask.sum()), prof.R, prof.delta)
    if reference is not None:
        c2 = decay_check(reference, prof).constant
        return _with_stability(rep, c2, rel_tol)
    return rep


def _with_stability(rep: DecayReport, other: float, rel_tol: float) -> DecayReport:
    scale = max(abs(rep.constant), abs(other))
    change = 0.0 if scale == 0 else abs(rep.constant - other) / scale
    return DecayReport(rep.constant, rep.samples, rep.R, rep.delta, change <= rel_tol, change)


@dataclass(frozen=True)
class DerivativeDecayReport:
    weighted_characteristic: DecayReport  # |(sqrt(r) u)_t + (sqrt(r) u)_r| r^(1+delta)
    incoming: DecayReport  # |u_t + u_r| r^(3/2)
    outgoing: DecayReport  # |u_t - u_r| r^(1/2)

    @property
    def constants(self) -> tuple:
        return (self.weighted_characteristic.constant, self.incoming.constant, self.outgoing.constant)

    @property
    def stable(self) -> Optional[bool]:
        flags = [r.stable for r in (self.weighted_characteristic, self.incoming, self.outgoing)]
        return None if None in flags else all(flags)


def _derivative_sups(traj, prof):
    T, Rr, mask = _exterior(traj, prof.R)
    if not mask.any():
        raise EuclideanError("no samples in the exterior region")
    ur = np.gradient(traj.U, traj.grid.h, axis=1)
    u, ut = traj.U, traj.UT
    r = Rr
    sr = np.sqrt(np.where(r > 0, r, 1.0))
    w = sr * (ut + ur) + u / (2 * sr)
    a = np.abs(w[mask]) * r[mask] ** (1 + prof.delta)
    b = np.abs((ut + ur)[mask]) * r[mask] ** 1.5
    c = np.abs((ut - ur)[mask]) * r[mask] ** 0.5
    n = int(mask.sum())
    return [DecayReport(float(x.max()), n, prof.R, prof.delta) for x in (a, b, c)]


def derivative_decay_check(traj: EuclideanTrajectory, prof: DecayProfile,
                           reference: Optional[EuclideanTrajectory] = None, rel_tol: float = 0.2
                           ) -> DerivativeDecayReport:
    """Sup of the three characteristic-derivative quantities with their decay weights."""
    reps = _derivative_sups(traj, prof)
    if reference is not None:
        other = _derivative_sups(reference, prof)
        reps = [_with_stability(a, b.constant, rel_tol) for a, b in zip(reps, other)]
    return DerivativeDecayReport(*reps)


@dataclass(frozen=True)
class ResidualReport:
    max_residual: float
    samples: int


def reduction_residual(traj: EuclideanTrajectory, R: float = 1.0, nonlinear: bool = True) -> ResidualReport:
    """max |(d_t^2 - d_r^2)(sqrt(r) u) - G| with G = -sqrt(r) u^5 + r^(-3/2) u / 4 over r > t + R."""
    if len(traj.times) < 3:
        raise EuclideanError("need at least 3 stored time levels")
    dt = traj.times[1] - traj.times[0]
    h = traj.grid.h
    r = traj.r
    W = np.sqrt(r)[None, :] * traj.U
    wtt = (W[2:, 1:-1] - 2 * W[1:-1, 1:-1] + W[:-2, 1:-1]) / dt**2
    wrr = (W[1:-1, 2:] - 2 * W[1:-1, 1:-1] + W[1:-1, :-2]) / h**2
    u = traj.U[1:-1, 1:-1]
    ri = r[1:-1]
    G = 0.25 * ri ** (-1.5) * u
    if nonlinear:
        G = G - np.sqrt(ri) * u**5
    res = np.abs(wtt - wrr - G)
    T, Rr = np.meshgrid(traj.times[1:-1], ri, indexing="ij")
    mask = (T >= 0) & (Rr > T + R) & (Rr <= traj.r_valid(T) - h)
    if not mask.any():
        raise EuclideanError("no samples in the exterior region")
    return ResidualReport(float(res[mask].max()), int(mask.sum()))
