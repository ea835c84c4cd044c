"""Light-cone transform between radial waves on R^2 x R and shifted waves on H^2 x R.

Inside the forward cone {t - t0 > |x|} we use

    x = e^tau sinh(s) Theta,   t = t0 + e^tau cosh(s),

and v(s, tau) = e^(tau/2) u(e^tau sinh s, t0 + e^tau cosh s). A radial
solution of u_tt - Delta u = -u^5 becomes a solution of
v_tt - (Delta_H + 1/4) v = -v^5 on the hyperbolic plane.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicSpline

from .geometry import RadialGrid, StatePair

RHO = 0.5
ANGULAR = 2.0 * math.pi  # circle measure; the constant c of the ring energy


class ConeError(ValueError):
    pass


@dataclass(frozen=True)
class ConeCoords:
    t0: float
    tau: float
    s: float

    def __post_init__(self):
        if self.s < 0:
            raise ConeError("s must be nonnegative")

    def to_cone(self) -> tuple[float, float]:
        return hyperbolic_to_cone(self.tau, self.s, self.t0)


def cone_to_hyperbolic(x_abs, t, t0):
    """(|x|, t) in the open forward cone of (0, t0) -> (tau, s)."""
    x_abs = np.asarray(x_abs, dtype=float)
    tp = np.asarray(t, dtype=float) - t0
    if np.any(x_abs < 0) or np.any(tp <= x_abs):
        raise ConeError("point outside the open light cone t - t0 > |x|")
    tau = 0.5 * np.log((tp - x_abs) * (tp + x_abs))
    s = np.arctanh(x_abs / tp)
    if tau.ndim == 0:
        return float(tau), float(s)
    return tau, s


def hyperbolic_to_cone(tau, s, t0):
    e = np.exp(np.asarray(tau, dtype=float))
    s = np.asarray(s, dtype=float)
    x, t = e * np.sinh(s), t0 + e * np.cosh(s)
    if x.ndim == 0:
        return float(x), float(t)
    return x, t


def s_tau(tau: float, t0: float) -> float:
    """Hyperbolic radius at which the slice tau meets t = 0."""
    arg = -math.exp(-tau) * t0
    if arg < 1:
        raise ConeError("the slice does not reach t = 0 (need -t0 e^-tau >= 1)")
    return math.acosh(arg)


class ClosedForm:
    """Space-time field given by formulas; derivatives default to central differences."""

    def __init__(self, u: Callable, u_r: Optional[Callable] = None, u_t: Optional[Callable] = None,
                 step: float = 1e-5):
        self._f, self._fr, self._ft, self.step = u, u_r, u_t, step

    def check(self, r, t) -> None:
        return None

    def u(self, r, t):
        return np.asarray(self._f(np.asarray(r, float), np.asarray(t, float)), dtype=float) + 0.0 * np.asarray(r)

    def u_r(self, r, t):
        if self._fr is not None:
            return self._fr(r, t)
        e = self.step
        return (self.u(np.asarray(r) + e, t) - self.u(np.asarray(r) - e, t)) / (2 * e)

    def u_t(self, r, t):
        if self._ft is not None:
            return self._ft(r, t)
        e = self.step
        return (self.u(r, np.asarray(t) + e) - self.u(r, np.asarray(t) - e)) / (2 * e)


def _field(obj):
    # accept a trajectory (anything with .interpolant()) or a ready sampler
    return obj.interpolant() if hasattr(obj, "interpolant") else obj


def pullback_values(field, t0: float, tau, s):
    """v(tau, s) = e^(tau/2) u(e^tau sinh s, t0 + e^tau cosh s) on broadcast arrays."""
    f = _field(field)
    x, t = hyperbolic_to_cone(tau, s, t0)
    f.check(x, t)
    return np.exp(RHO * np.asarray(tau)) * f.u(x, t)


def pushforward(field, t0: float, tau: float, grid: RadialGrid) -> StatePair:
    """Cauchy data (v, v_tau) on the H^2 grid at hyperbolic time tau."""
    if grid.n != 2:
        raise ConeError("the transform lands on H^2; use an n = 2 grid")
    f = _field(field)
    s = grid.points
    x, t = hyperbolic_to_cone(tau, s, t0)
    f.check(x, t)
    e = math.exp(tau)
    u, ur, ut = f.u(x, t), f.u_r(x, t), f.u_t(x, t)
    scale = math.exp(RHO * tau)
    v = scale * u
    vt = scale * (RHO * u + ur * e * np.sinh(s) + ut * e * np.cosh(s))
    return StatePair.from_arrays(grid, v, vt, tau)


@dataclass(frozen=True)
class TransportResidual:
    max_residual: float
    k: float
    samples: int


def shifted_wave_residual(field, t0: float, tau_range=(-0.9, -0.1), s_range=(0.2, 1.8), k: float = 0.02,
                          nonlinear: bool = True) -> TransportResidual:
    """max |v_tautau - v_ss - coth(s) v_s - v/4 + v^5| on a (tau, s) lattice of spacing k.

    The second differences in tau and s use the pulled-back samples only, so
    the result measures how well the sampled field solves the shifted wave
    equation on H^2.
    """
    taus = np.arange(tau_range[0] - k, tau_range[1] + 1.5 * k, k)
    ss = np.arange(s_range[0] - k, s_range[1] + 1.5 * k, k)
    T, S = np.meshgrid(taus, ss, indexing="ij")
    V = pullback_values(field, t0, T, S)
    c = V[1:-1, 1:-1]
    v_tt = (V[2:, 1:-1] - 2 * c + V[:-2, 1:-1]) / k**2
    v_ss = (V[1:-1, 2:] - 2 * c + V[1:-1, :-2]) / k**2
    v_s = (V[1:-1, 2:] - V[1:-1, :-2]) / (2 * k)
    coth = 1.0 / np.tanh(S[1:-1, 1:-1])
    res = v_tt - v_ss - coth * v_s - RHO**2 * c
    if nonlinear:
        res = res + c**5
    return TransportResidual(float(np.max(np.abs(res))), k, int(res.size))


def conjugation_residual(test_u: Callable, t0: float, samples, h: float = 1e-3) -> float:
    """Finite-difference check of e^(tau/2)(-u_tt + Delta u) = e^(-2 tau)(-v_tautau + Delta_H v + v/4).

    ``test_u(r, t)`` is a smooth radial function; ``samples`` is an iterable
    of (tau, s) points with s > h. Both sides use centred differences of step h.
    """
    worst = 0.0
    for tau, s in samples:
        x, t = hyperbolic_to_cone(tau, s, t0)
        if x <= h:
            raise ConeError("samples must stay away from the axis")
        u = test_u
        lap = (u(x + h, t) - 2 * u(x, t) + u(x - h, t)) / h**2 + (u(x + h, t) - u(x - h, t)) / (2 * h * x)
        utt = (u(x, t + h) - 2 * u(x, t) + u(x, t - h)) / h**2
        lhs = math.exp(RHO * tau) * (-utt + lap)

        def v(a, b):
            xx, tt = hyperbolic_to_cone(a, b, t0)
            return math.exp(RHO * a) * u(xx, tt)

        vtt = (v(tau + h, s) - 2 * v(tau, s) + v(tau - h, s)) / h**2
        vss = (v(tau, s + h) - 2 * v(tau, s) + v(tau, s - h)) / h**2
        vs = (v(tau, s + h) - v(tau, s - h)) / (2 * h)
        rhs = math.exp(-2 * tau) * (-vtt + vss + vs / math.tanh(s) + RHO**2 * v(tau, s))
        worst = max(worst, abs(lhs - rhs))
    return worst


@dataclass(frozen=True)
class SlabIdentity:
    hyperbolic: float  # int int |v|^q dmu dtau
    euclidean: float  # int int |u|^q e^{(q/2 - 3) tau} dx dt over the preimage
    relative: float


def slab_identity(field, t0: float, tau_range=(-1.0, 0.0), s_max: float = 2.0, power: float = 6.0,
                  nodes: int = 48) -> SlabIdentity:
    """Compare a (tau, s) slab integral with the same integral written in (r, t).

    With q = power, |v|^q dmu dtau = e^{(q/2 - 3) tau} |u|^q dx dt, so for
    q = 6 the weight disappears and for q = 0 this is the volume identity
    dx dt = e^{3 tau} dmu dtau.
    """
    f = _field(field)
    ta, tb = tau_range
    if not tb > ta:
        raise ConeError("empty tau range")
    gx, gw = np.polynomial.legendre.leggauss(nodes)

    def gl(a, b):
        return 0.5 * (b - a) * (gx + 1) + a, 0.5 * (b - a) * gw

    # hyperbolic side, composite in s to follow the sinh growth
    lhs = 0.0
    s_edges = np.linspace(0.0, s_max, 9)
    tn, tw = gl(ta, tb)
    for a, b in zip(s_edges[:-1], s_edges[1:]):
        sn, sw = gl(a, b)
        T, S = np.meshgrid(tn, sn, indexing="ij")
        V = np.abs(pullback_values(f, t0, T, S)) ** power
        lhs += float(tw @ (V * ANGULAR * np.sinh(S)) @ sw)

    # euclidean side: t outer (adaptive, with the kinks as breakpoints), r inner
    ea, eb = math.exp(ta), math.exp(tb)
    th = math.tanh(s_max)
    q = power

    def r_limits(tp):
        lo2 = tp * tp - eb * eb
        lo = math.sqrt(lo2) if lo2 > 0 else 0.0
        hi = min(math.sqrt(max(tp * tp - ea * ea, 0.0)), th * tp)
        return lo, hi

    def inner(tp):
        lo, hi = r_limits(tp)
        if hi <= lo:
            return 0.0
        rn, rw = gl(lo, hi)
        t = np.full_like(rn, t0 + tp)
        u = np.abs(f.u(rn, t)) ** q
        tau = 0.5 * np.log(np.maximum(tp * tp - rn * rn, 1e-300))
        return float(rw @ (u * np.exp((q / 2 - 3) * tau) * ANGULAR * rn))

    brk = sorted({ea, eb, ea * math.cosh(s_max), eb * math.cosh(s_max)})
    rhs = 0.0
    for a, b in zip(brk[:-1], brk[1:]):
        rhs += quad(inner, a, b, epsabs=0.0, epsrel=1e-11, limit=200)[0]
    rel = abs(lhs - rhs) / max(abs(rhs), 1e-300)
    return SlabIdentity(lhs, rhs, rel)


# --- local energies -----------------------------------------------------------


def _check_tau(tau: float) -> None:
    if not -1.0 <= tau <= 0.0:
        raise ConeError("tau must lie in [-1, 0]")


def local_energy_J1(v_state: StatePair, tau: float, t0: float) -> float:
    """Local energy of v on the disk s < s_tau of the H^2 slice.

    J1 = 1/2 int (v_tau^2 + v_s^2 - v^2/4 + v^6/3) dmu, dmu = 2 pi sinh(s) ds.
    """
    _check_tau(tau)
    st = s_tau(tau, t0)
    g = v_state.grid
    if g.n != 2:
        raise ConeError("J1 lives on H^2")
    if st > g.r_max - 2 * g.h:
        raise ConeError("the grid does not cover the disk s < s_tau")
    s = g.points
    v, vt = v_state.u.values, v_state.ut.values
    vs = np.gradient(v, g.h, edge_order=2)
    dens = (vt**2 + vs**2 - RHO**2 * v**2 + v**6 / 3.0) * ANGULAR * np.sinh(s)
    return 0.5 * float(CubicSpline(s, dens).integrate(0.0, st))


def local_energy_J1_from_u(field, tau: float, t0: float, nodes: int = 200) -> float:
    """Same disk energy written through u, u_r, u_t on the hyperboloid."""
    _check_tau(tau)
    f = _field(field)
    st = s_tau(tau, t0)
    x, w = np.polynomial.legendre.leggauss(nodes)
    s = 0.5 * st * (x + 1)
    w = 0.5 * st * w
    e = math.exp(tau)
    xr, t = hyperbolic_to_cone(tau, s, t0)
    f.check(xr, t)
    u, ur, ut = f.u(xr, t), f.u_r(xr, t), f.u_t(xr, t)
    sh, ch = np.sinh(s), np.cosh(s)
    w2 = math.exp(2 * RHO * tau)
    dens = w2 * ((ur**2 + ut**2) * e * e * (ch**2 + sh**2) + 4 * ur * ut * e * e * sh * ch)
    dens += w2 * (2 * RHO * u * ur * e * sh + 2 * RHO * u * ut * e * ch)
    dens += math.exp(3 * tau) * u**6 / 3.0
    return 0.5 * float(w @ (dens * ANGULAR * sh))


@dataclass(frozen=True)
class RingEnergy:
    J2: float
    r: np.ndarray
    g: np.ndarray
    g_terms: tuple  # (g1, g2, g3, g4)
    g_bound_constant: float  # sup |g| r^(1+delta)
    term_constants: tuple  # sup |g1| r^(1+delta), |g2| r^3, |g3| r^3, |g4| r^2
    tail_bound: float  # pi * C / (delta r_end^delta): bound on J2 beyond r_end


def local_energy_J2(field, tau: float, s0: float, t0: float, delta: float, R: Optional[float] = None,
                    points: int = 4001) -> RingEnergy:
    """Ring energy J2(tau, s0) from samples of u on the hyperboloid, split into g1..g4."""
    _check_tau(tau)
    f = _field(field)
    e = math.exp(tau)
    r_lo = math.sqrt(t0 * t0 - e * e)
    r_hi = e * math.sinh(s0)
    if not r_hi > r_lo:
        raise ConeError("s0 must exceed s_tau")
    r = np.linspace(r_lo, r_hi, points)
    tp = np.sqrt(r * r + e * e)
    t = t0 + tp
    if R is not None and np.any(r - t <= R):
        raise ConeError("ring leaves the exterior region r > t + R")
    f.check(r, t)
    u, ur, ut = f.u(r, t), f.u_r(r, t), f.u_t(r, t)
    g1 = 2 * r * r * (ur**2 + ut**2) + 4 * r * r * ur * ut + 2 * RHO * u * ur * r + 2 * RHO * u * ut * r
    g2 = e * e / 3.0 * r / tp * u**6
    g3 = (r * (r * r + tp * tp) / tp - 2 * r * r) * (ur**2 + ut**2)
    g4 = (r * r / tp - r) * (2 * RHO * u * ur)
    g = g1 + g2 + g3 + g4
    J2 = 0.5 * ANGULAR * float(CubicSpline(r, g).integrate(r_lo, r_hi))
    C = float(np.max(np.abs(g) * r ** (1 + delta)))
    terms = (
        float(np.max(np.abs(g1) * r ** (1 + delta))),
        float(np.max(np.abs(g2) * r**3)),
        float(np.max(np.abs(g3) * r**3)),
        float(np.max(np.abs(g4) * r**2)),
    )
    tail = 0.5 * ANGULAR * C / (delta * r_hi**delta)
    return RingEnergy(J2, r, g, (g1, g2, g3, g4), C, terms, tail)


@dataclass(frozen=True)
class LocalEnergyReport:
    tau: float
    J1: float
    J2_samples: list  # (s0, J2)
    g_bound_constant: float


def local_energy_report(field, tau: float, t0: float, s0_values, delta: float, grid: Optional[RadialGrid] = None,
                        R: Optional[float] = None) -> LocalEnergyReport:
    st = s_tau(tau, t0)
    if grid is None:
        grid = RadialGrid(2, st + 0.5, 801)
    J1 = local_energy_J1(pushforward(field, t0, tau, grid), tau, t0)
    samples, C = [], 0.0
    for s0 in s0_values:
        ring = local_energy_J2(field, tau, s0, t0, delta, R)
        samples.append((float(s0), ring.J2))
        C = max(C, ring.g_bound_constant)
    return LocalEnergyReport(tau, J1, samples, C)
