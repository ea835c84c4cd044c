"""Radial solver for the shifted semilinear wave equation on H^n.

    u_tt - (Delta + rho^2) u = zeta |u|^(p-1) u

Space is discretised by the conservative stencil of :mod:`hypwave.operators`;
time stepping is velocity Verlet by default. Diagnostics (energy, Morawetz
accumulator, virial functional) are evaluated after every step, while only a
decimated set of states is stored.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from scipy.integrate import quad

from .geometry import RadialField, RadialGrid, StatePair, check_dim
from .operators import (
    SpectralError,
    SpectralOperator,
    build_spectral,
    pair_norm,
    propagate_coefficients,
)

log = logging.getLogger(__name__)

COMPLETED = "completed"
BLOWUP = "blowup_detected"
CONTAMINATED = "boundary_contamination"

INTEGRATORS = ("leapfrog", "rk4", "spectral_splitting")
GAUSSIAN_TAIL = 5.3  # exp(-5.3^2) ~ 6e-13


class ConfigError(ValueError):
    pass


def critical_p(n: int) -> float:
    n = check_dim(n)
    return math.inf if n == 2 else 1.0 + 4.0 / (n - 2)


@dataclass(frozen=True)
class Profile:
    """Named radial initial profile.

    kind is one of ``zero``, ``gaussian`` (A exp(-((r-c)/w)^2)), ``bump``
    (compactly supported C-infinity bump of half-width w), ``eigenmode`` (k-th
    discrete eigenvector scaled by A) or ``file`` (two-column r, value table).
    """

    kind: str = "zero"
    amplitude: float = 1.0
    center: float = 0.0
    width: float = 1.0
    k: int = 0
    path: Optional[str] = None

    def __post_init__(self):
        if self.kind not in ("zero", "gaussian", "bump", "eigenmode", "file"):
            raise ConfigError(f"unknown profile kind {self.kind!r}")
        if self.kind in ("gaussian", "bump") and not self.width > 0:
            raise ConfigError("profile width must be positive")
        if self.kind == "file" and not self.path:
            raise ConfigError("file profile needs a path")

    @classmethod
    def gaussian(cls, amplitude=1.0, center=0.0, width=1.0) -> "Profile":
        return cls("gaussian", amplitude, center, width)

    @classmethod
    def bump(cls, amplitude=1.0, center=0.0, width=1.0) -> "Profile":
        return cls("bump", amplitude, center, width)

    def scaled(self, factor: float) -> "Profile":
        return Profile(self.kind, self.amplitude * factor, self.center, self.width, self.k, self.path)

    def support_radius(self) -> float:
        """Radius beyond which the profile is negligible (inf when unknown)."""
        if self.kind == "zero" or self.amplitude == 0:
            return 0.0
        if self.kind == "gaussian":
            return self.center + GAUSSIAN_TAIL * self.width
        if self.kind == "bump":
            return self.center + self.width
        if self.kind == "file":
            r, v = self._table()
            nz = np.nonzero(v)[0]
            return float(r[nz[-1]]) if nz.size else 0.0
        return math.inf

    def _table(self):
        data = np.loadtxt(self.path, delimiter="," if str(self.path).endswith(".csv") else None, ndmin=2)
        if data.shape[1] < 2:
            raise ConfigError("profile file needs two columns (r, value)")
        return data[:, 0], self.amplitude * data[:, 1]

    def evaluate(self, r: np.ndarray) -> np.ndarray:
        """Profile values at radii r (not available for eigenmodes)."""
        r = np.asarray(r, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(r)
        if self.kind == "gaussian":
            return self.amplitude * np.exp(-(((r - self.center) / self.width) ** 2))
        if self.kind == "bump":
            x = (r - self.center) / self.width
            out = np.zeros_like(r)
            inside = np.abs(x) < 1
            out[inside] = self.amplitude * np.exp(1.0 - 1.0 / (1.0 - x[inside] ** 2))
            return out
        if self.kind == "file":
            rr, vv = self._table()
            return np.interp(r, rr, vv, right=0.0)
        raise ConfigError("eigenmode profiles need a spectral operator")

    def sample(self, grid: RadialGrid, op: Optional[SpectralOperator] = None) -> np.ndarray:
        if self.kind == "eigenmode":
            op = op or build_spectral(grid)
            if not 0 <= self.k < op.size:
                raise ConfigError(f"eigenmode index {self.k} out of range")
            return self.amplitude * op.eigenfunction(self.k).values
        v = self.evaluate(grid.points)
        v[-1] = 0.0
        return v


@dataclass(frozen=True)
class SimConfig:
    n: int = 3
    p: float = 3.0
    zeta: int = -1
    r_max: float = 20.0
    num_points: int = 2000
    t_final: float = 10.0
    dt: Optional[float] = None  # default: half the grid spacing
    u0: Profile = field(default_factory=Profile.gaussian)
    u1: Profile = field(default_factory=Profile)
    nonlinear: bool = True
    integrator: str = "leapfrog"
    snapshots: int = 64
    blowup_threshold: float = 1e8
    contamination_threshold: float = 1e-6
    allow_supercritical: bool = False
    check_support: bool = True

    def __post_init__(self):
        check_dim(self.n)
        if self.zeta not in (-1, 1):
            raise ConfigError("zeta must be -1 (defocusing) or +1 (focusing)")
        if not self.p > 1:
            raise ConfigError("p must exceed 1")
        if self.p >= critical_p(self.n) and not self.allow_supercritical:
            raise ConfigError(f"p={self.p} is not below the energy-critical exponent {critical_p(self.n)}")
        if not self.t_final >= 0:
            raise ConfigError("t_final must be nonnegative")
        if self.integrator not in INTEGRATORS:
            raise ConfigError(f"integrator must be one of {INTEGRATORS}")
        if self.snapshots < 2:
            raise ConfigError("need at least 2 snapshots")
        h = self.r_max / (self.num_points - 1)
        if self.dt is not None and not (0 < self.dt <= 0.5 * h):
            raise ConfigError(f"dt={self.dt} violates the CFL bound dt <= h/2 = {0.5 * h}")
        if self.check_support:
            reach = max(self.u0.support_radius(), self.u1.support_radius()) + self.t_final
            if reach >= self.r_max:
                raise ConfigError(
                    f"r_max={self.r_max} is inside the light cone of the data (needs > {reach:.3f})"
                )

    @property
    def h(self) -> float:
        return self.r_max / (self.num_points - 1)

    def step_plan(self) -> tuple[int, float]:
        """Number of steps and the step size that lands exactly on t_final."""
        dt = self.dt if self.dt is not None else 0.5 * self.h
        if self.t_final == 0:
            return 0, dt
        steps = max(1, math.ceil(self.t_final / dt - 1e-9))
        return steps, self.t_final / steps

    def grid(self) -> RadialGrid:
        return RadialGrid(self.n, self.r_max, self.num_points)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Trajectory:
    """Stored states plus per-step diagnostics of one run."""

    config: SimConfig
    grid: RadialGrid
    times: np.ndarray
    energy: np.ndarray
    morawetz_acc: np.ndarray
    M: np.ndarray
    Mprime: np.ndarray
    Msecond: np.ndarray
    max_abs_u: np.ndarray
    snapshots: list
    status: str
    status_time: float
    direction: int = 1

    @property
    def completed(self) -> bool:
        return self.status == COMPLETED

    @property
    def final(self) -> StatePair:
        return self.snapshots[-1]

    def write_series_csv(self, path) -> None:
        rows = zip(self.times, self.energy, self.morawetz_acc, self.M, self.Mprime, self.max_abs_u)
        _write_csv(path, ("t", "energy", "morawetz_acc", "M", "Mprime", "max_abs_u"), rows)

    def write_snapshots_csv(self, directory) -> list[Path]:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        paths = []
        for i, s in enumerate(self.snapshots):
            p = d / f"snapshot_{i:04d}.csv"
            _write_csv(p, ("r", "u", "ut"), zip(s.grid.points, s.u.values, s.ut.values), header_note=f"t={s.time!r}")
            paths.append(p)
        return paths


def _fmt(x) -> str:
    return repr(float(x))


def _write_csv(path, header, rows, header_note: Optional[str] = None) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if header_note:
            fh.write(f"# {header_note}\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])


def power_nonlinearity(u: np.ndarray, p: float) -> np.ndarray:
    """|u|^(p-1) u, written as sign(u)|u|^p so that u = 0 stays exact for any real p."""
    if float(p).is_integer() and int(p) % 2 == 1:
        return u ** int(p)
    return np.sign(u) * np.abs(u) ** p


# --- diagnostics -----------------------------------------------------------


class _Diagnostics:
    """Per-step quantities built from the stiffness and lumped mass."""

    def __init__(self, grid: RadialGrid, stiff, p: float, zeta: int, nonlinear: bool):
        self.K = stiff
        self.m = stiff.mass
        self.rho2 = grid.rho**2
        self.p = p
        self.coupling = zeta if nonlinear else 0

    def potential(self, u):
        return float(self.m @ np.abs(u[1:-1]) ** (self.p + 1))

    def energy(self, u, ut):
        v = u[1:-1]
        lin = self.K.quadratic_form(u) - self.rho2 * float(self.m @ (v * v))
        kin = float(self.m @ (ut[1:-1] ** 2))
        return 0.5 * lin + 0.5 * kin - self.coupling / (self.p + 1) * self.potential(u)

    def virial(self, u, ut, E, Lp):
        v, w = u[1:-1], ut[1:-1]
        M = float(self.m @ (v * v))
        Mp = 2.0 * float(self.m @ (v * w))
        Mpp = -4.0 * E + 4.0 * float(self.m @ (w * w)) + 2.0 * (self.p - 1) / (self.p + 1) * Lp
        return M, Mp, Mpp


def energy(state: StatePair, p: float, zeta: int, op: SpectralOperator) -> float:
    """E = 1/2 ||u||^2_{H^{0,1}} + 1/2 ||u_t||^2 - zeta/(p+1) ||u||^{p+1}_{L^{p+1}}."""
    if state.grid is not op.grid:
        raise ValueError("state and operator live on different grids")
    c = op.coefficients(state.u)
    lin = float(np.sum((op.raw_eigenvalues - op.rho2) * c**2))
    m = op.stiffness.mass
    kin = float(m @ state.ut.values[1:-1] ** 2)
    pot = float(m @ np.abs(state.u.values[1:-1]) ** (p + 1))
    return 0.5 * lin + 0.5 * kin - zeta / (p + 1) * pot


# --- time stepping ---------------------------------------------------------


def simulate(cfg: SimConfig, direction: int = 1, op: Optional[SpectralOperator] = None) -> Trajectory:
    """Integrate from t = 0 to direction * t_final.

    ``direction=-1`` runs backwards in time by reversing the initial velocity;
    reported times are then negative and stored velocities refer to the
    original time orientation.
    """
    if direction not in (1, -1):
        raise ValueError("direction must be +1 or -1")
    grid = cfg.grid() if op is None else op.grid
    if (grid.n, grid.r_max, grid.num_points) != (cfg.n, cfg.r_max, cfg.num_points):
        raise ConfigError("operator grid does not match the configuration")
    needs_op = cfg.integrator == "spectral_splitting" or "eigenmode" in (cfg.u0.kind, cfg.u1.kind)
    if needs_op and op is None:
        op = build_spectral(grid)
    stiff = op.stiffness if op is not None else _stiffness(grid)
    u = cfg.u0.sample(grid, op)
    ut = direction * cfg.u1.sample(grid, op)
    u[0] = u[1]
    ut[0] = ut[1]
    steps, dt = cfg.step_plan()
    diag = _Diagnostics(grid, stiff, cfg.p, cfg.zeta, cfg.nonlinear)
    coupling = cfg.zeta if cfg.nonlinear else 0

    def force(x):
        f = diag.rho2 * x - stiff.neg_laplacian(x)
        if coupling:
            f = f + coupling * power_nonlinearity(x, cfg.p)
        f[0] = f[1]
        f[-1] = 0.0
        return f

    store_at = set(np.unique(np.linspace(0, steps, min(cfg.snapshots, steps + 1)).round().astype(int)).tolist())
    n_rec = steps + 1
    times = np.zeros(n_rec)
    E = np.zeros(n_rec)
    acc = np.zeros(n_rec)
    M = np.zeros(n_rec)
    Mp = np.zeros(n_rec)
    Mpp = np.zeros(n_rec)
    umax = np.zeros(n_rec)
    snaps = []

    def record(i, t, u, ut):
        Lp = diag.potential(u)
        E[i] = diag.energy(u, ut)
        M[i], Mp[i], Mpp[i] = diag.virial(u, ut, E[i], Lp)
        Mp[i] *= direction
        umax[i] = float(np.max(np.abs(u)))
        times[i] = direction * t
        if i > 0:
            acc[i] = acc[i - 1] + 0.5 * dt * (record.prev_Lp + Lp)
        record.prev_Lp = Lp
        if i in store_at:
            snaps.append(StatePair.from_arrays(grid, u, direction * ut, direction * t))

    record.prev_Lp = 0.0
    record(0, 0.0, u, ut)
    status, status_time, last = COMPLETED, direction * cfg.t_final, steps

    stepper = _make_stepper(cfg.integrator, force, dt, op, coupling, cfg.p)
    state = stepper.init(u, ut)
    for i in range(1, steps + 1):
        state = stepper.step(state)
        u, ut = stepper.fields(state)
        bad = not (np.all(np.isfinite(u)) and np.all(np.isfinite(ut)))
        if bad or np.max(np.abs(u)) > cfg.blowup_threshold:
            status, status_time, last = BLOWUP, direction * (i - 1) * dt, i - 1
            log.info("blow-up detected after t=%g", status_time)
            break
        record(i, i * dt, u, ut)
        if abs(u[-2]) > cfg.contamination_threshold:
            status, status_time, last = CONTAMINATED, direction * i * dt, i
            log.warning("boundary contamination at t=%g", status_time)
            break
    if last < steps:
        # make sure the last good state is kept
        if not snaps or snaps[-1].time != times[last]:
            if status == CONTAMINATED:
                snaps.append(StatePair.from_arrays(grid, u, direction * ut, times[last]))
            elif stepper.last_good is not None:
                lu, lut = stepper.last_good
                snaps.append(StatePair.from_arrays(grid, lu, direction * lut, times[last]))
    sl = slice(0, last + 1)
    return Trajectory(
        cfg, grid, times[sl], E[sl], acc[sl], M[sl], Mp[sl], Mpp[sl], umax[sl], snaps, status, status_time, direction
    )


def _stiffness(grid):
    from .operators import RadialStiffness

    return RadialStiffness(grid)


class _Stepper:
    last_good = None

    def fields(self, state):
        return state[0], state[1]


class _Verlet(_Stepper):
    def __init__(self, force, dt):
        self.force, self.dt = force, dt

    def init(self, u, ut):
        return u, ut, self.force(u)

    def step(self, state):
        u, ut, a = state
        self.last_good = (u, ut)
        ut_half = ut + 0.5 * self.dt * a
        u_new = u + self.dt * ut_half
        u_new[0] = u_new[1]
        u_new[-1] = 0.0
        with np.errstate(over="ignore", invalid="ignore"):
            a_new = self.force(u_new)
        return u_new, ut_half + 0.5 * self.dt * a_new, a_new


class _RK4(_Stepper):
    def __init__(self, force, dt):
        self.force, self.dt = force, dt

    def init(self, u, ut):
        return u, ut

    def step(self, state):
        u, ut = state
        self.last_good = (u, ut)
        dt, f = self.dt, self.force
        with np.errstate(over="ignore", invalid="ignore"):
            k1u, k1v = ut, f(u)
            k2u, k2v = ut + 0.5 * dt * k1v, f(u + 0.5 * dt * k1u)
            k3u, k3v = ut + 0.5 * dt * k2v, f(u + 0.5 * dt * k2u)
            k4u, k4v = ut + dt * k3v, f(u + dt * k3u)
        u_new = u + dt / 6 * (k1u + 2 * k2u + 2 * k3u + k4u)
        ut_new = ut + dt / 6 * (k1v + 2 * k2v + 2 * k3v + k4v)
        u_new[0], ut_new[0] = u_new[1], ut_new[1]
        u_new[-1] = ut_new[-1] = 0.0
        return u_new, ut_new


class _Splitting(_Stepper):
    """Strang splitting: exact discrete linear flow between nonlinear half kicks."""

    def __init__(self, op, dt, coupling, p):
        self.op, self.dt, self.coupling, self.p = op, dt, coupling, p

    def _kick(self, u):
        return self.op.coefficients(self.coupling * power_nonlinearity(u, self.p))

    def init(self, u, ut):
        a, b = self.op.coefficients(u), self.op.coefficients(ut)
        u = self.op.synthesize(a)
        return a, b, u

    def step(self, state):
        a, b, u = state
        self.last_good = (u, self.op.synthesize(b))
        with np.errstate(over="ignore", invalid="ignore"):
            if self.coupling:
                b = b + 0.5 * self.dt * self._kick(u)
            a, b = propagate_coefficients(a, b, self.dt, self.op.lam)
            u = self.op.synthesize(a)
            if self.coupling:
                b = b + 0.5 * self.dt * self._kick(u)
        return a, b, u

    def fields(self, state):
        return state[2], self.op.synthesize(state[1])


def _make_stepper(name, force, dt, op, coupling, p):
    if name == "leapfrog":
        return _Verlet(force, dt)
    if name == "rk4":
        return _RK4(force, dt)
    return _Splitting(op, dt, coupling, p)


def simulate_both_directions(cfg: SimConfig, op: Optional[SpectralOperator] = None):
    """Forward and backward runs from the same Cauchy data."""
    return simulate(cfg, 1, op), simulate(cfg, -1, op)


# --- exact H^3 oracle -------------------------------------------------------


def dalembert_h3(u0: Callable, r: np.ndarray, t: float, u1: Optional[Callable] = None, fd_step: float = 1e-5):
    """Linear solution on H^3 via v = sinh(r) u, which solves the flat 1D wave equation.

    The odd extension of v across r = 0 encodes regularity at the origin; the
    outer truncation is ignored, so the result is exact only before the
    signal reaches r_max.
    """
    r = np.asarray(r, dtype=float)

    def F(x):
        x = np.asarray(x, dtype=float)
        return np.sinh(x) * u0(np.abs(x))

    def G(x):
        return math.sinh(x) * float(u1(abs(x)))

    out = np.empty_like(r)
    pos = r > 0
    rp = r[pos]
    out[pos] = 0.5 * (F(rp - t) + F(rp + t)) / np.sinh(rp)
    # r = 0: the quotient tends to F'(t)
    out[~pos] = (F(t + fd_step) - F(t - fd_step)) / (2 * fd_step)
    if u1 is not None:
        vals = np.empty_like(r)
        for i, ri in enumerate(r):
            if ri > 0:
                vals[i] = quad(G, ri - t, ri + t, limit=200)[0] / (2 * math.sinh(ri))
            else:
                vals[i] = G(t)  # derivative of the primitive, G even-odd symmetric
        out = out + vals
    return out


# --- reports ----------------------------------------------------------------


@dataclass(frozen=True)
class MorawetzReport:
    accumulator: float
    energy: float
    bound: float
    margin: float
    violated: bool
    monotone: bool


def morawetz_constant(p: float) -> float:
    return 4.0 * (p + 1) / (p - 1)


def morawetz_report(traj, E: float, p: float) -> MorawetzReport:
    """Compare the space-time integral of |u|^(p+1) with 4(p+1)/(p-1) E.

    ``traj`` may be one trajectory or a (forward, backward) pair, in which
    case the accumulators of both time directions are added.
    """
    parts = traj if isinstance(traj, (tuple, list)) else [traj]
    for t in parts:
        if t.config.zeta != -1:
            raise ValueError("the Morawetz bound is claimed only for defocusing solutions")
    acc = sum(float(t.morawetz_acc[-1]) for t in parts)
    monotone = all(bool(np.all(np.diff(t.morawetz_acc) >= 0)) for t in parts)
    bound = morawetz_constant(p) * E
    margin = bound - acc
    violated = not (margin > 0 or (acc == 0 and bound == 0))
    return MorawetzReport(acc, E, bound, margin, violated, monotone)


@dataclass(frozen=True)
class VirialReport:
    times: np.ndarray
    M: np.ndarray
    Mprime: np.ndarray
    Msecond: np.ndarray
    ratio_slope: np.ndarray  # d/dt (M/M') by finite differences, nan outside the window
    window: tuple
    max_slope: float
    predicted_slope: float
    slope_ok: bool
    convex: bool
    blowup_window: tuple
    claim: bool
    message: str = ""


def virial_monitor(
    traj: Trajectory, E: float, p: float, rel_tol: float = 0.1, energy_tol: float = 1e-3
) -> VirialReport:
    """Track M = int u^2, its derivatives and the slope of M/M'.

    The window used for the slope test is the stretch where M and M' are
    positive and the discrete energy has drifted by at most ``energy_tol``
    relative to |E|, i.e. where the run is still resolved.
    """
    if traj.config.zeta != 1:
        log.warning("virial monitor applied to a defocusing run; no blow-up claim")
    t = np.abs(traj.times)
    # derivatives with respect to |t|, so backward runs read the same way
    M, Mp, Mpp = traj.M, traj.direction * traj.Mprime, traj.Msecond
    pred = (1.0 - p) / 4.0
    empty = np.full_like(t, np.nan)
    if not np.any(M > 0) or traj.config.zeta != 1 or not E <= 0:
        return VirialReport(t, M, Mp, Mpp, empty, (math.nan, math.nan), math.nan, pred, False, False,
                            (math.nan, math.nan), False, "no blow-up claim for this run")
    scale = max(abs(E), 1e-300)
    resolved = np.abs(traj.energy - traj.energy[0]) <= energy_tol * scale
    # the window is the leading resolved stretch
    stop = int(np.argmin(resolved)) if not resolved.all() else len(t)
    ok = np.zeros_like(resolved)
    ok[:stop] = True
    ok &= (M > 0) & (Mp > 0)
    slope = empty.copy()
    idx = np.nonzero(ok)[0]
    if idx.size < 3:
        return VirialReport(t, M, Mp, Mpp, slope, (math.nan, math.nan), math.nan, pred, False, False,
                            (math.nan, math.nan), True, "window with M, M' > 0 too short")
    ratio = M[idx] / Mp[idx]
    slope[idx] = np.gradient(ratio, t[idx])
    inner = idx[1:-1]  # one-sided differences at the window ends are first order
    max_slope = float(np.nanmax(slope[inner]))
    threshold = pred * (1.0 - rel_tol)
    convex = bool(np.all(Mpp[:stop] >= -4.0 * E * (1 - 1e-9)))
    t_last = t[idx[-1]]
    upper = t_last + (M[idx[-1]] / Mp[idx[-1]]) / abs(pred)
    lower = abs(traj.status_time) if traj.status == BLOWUP else t_last
    return VirialReport(t, M, Mp, Mpp, slope, (float(t[idx[0]]), float(t_last)), max_slope, pred,
                        max_slope <= threshold, convex, (float(lower), float(upper)), True)


@dataclass(frozen=True)
class ScatteringReport:
    times: np.ndarray
    increments: np.ndarray
    ratios: np.ndarray
    sigma: float
    consistent: bool
    message: str = ""


def profile_states(traj: Trajectory, op: SpectralOperator):
    """w(t) = S(-t)(u(t), u_t(t)) for every stored snapshot, as coefficient pairs."""
    out = []
    for s in traj.snapshots:
        a, b = propagate_coefficients(op.coefficients(s.u), op.coefficients(s.ut), -s.time, op.lam)
        out.append((s.time, a, b))
    return out


def scattering_diagnostic(
    traj: Trajectory, op: SpectralOperator, sigma: float = 0.5, t_min: float = 1.0, factor: float = 2.0,
    floor: float = 1e-13,
) -> ScatteringReport:
    """Cauchy increments of the pulled-back profile across dyadic times.

    Increments below ``floor`` (relative to the data norm) count as converged.
    """
    if traj.status != COMPLETED:
        raise ValueError(f"scattering diagnostic needs a completed run, got {traj.status}")
    if traj.config.zeta != -1:
        raise ValueError("scattering diagnostic is defined for defocusing runs")
    if traj.grid is not op.grid:
        raise ValueError("build the operator on traj.grid")
    snaps = traj.snapshots
    T = abs(snaps[-1].time)
    dyadic = []
    t = t_min
    while t <= T * (1 + 1e-12):
        dyadic.append(t)
        t *= 2
    if len(dyadic) < 4:
        raise ValueError("trajectory too short: fewer than 4 dyadic samples")
    stimes = np.array([abs(s.time) for s in snaps])
    picks = sorted({int(np.argmin(np.abs(stimes - d))) for d in dyadic})
    prof = profile_states(traj, op)
    base = pair_norm(snaps[0], sigma, op) or 1.0
    inc = []
    for i, j in zip(picks[:-1], picks[1:]):
        da = prof[j][1] - prof[i][1]
        db = prof[j][2] - prof[i][2]
        diff = StatePair.from_arrays(snaps[0].grid, op.synthesize(da), op.synthesize(db))
        inc.append(pair_norm(diff, sigma, op))
    inc = np.array(inc)
    ratios = inc[:-1] / np.where(inc[1:] > 0, inc[1:], np.nan)
    settled = inc <= floor * base
    ok = True
    for k in range(len(inc) - 1):
        if settled[k + 1]:
            continue
        if not inc[k] >= factor * inc[k + 1]:
            ok = False
    times = stimes[picks]
    return ScatteringReport(times, inc, ratios, sigma, ok)


def scale_to_negative_energy(cfg: SimConfig, factor: float = 1.2, op: Optional[SpectralOperator] = None) -> SimConfig:
    """Focusing data: rescale u0 (u1 = 0) so that E < 0, by ``factor`` beyond the zero-energy amplitude."""
    if cfg.zeta != 1:
        raise ValueError("only focusing data can have negative energy")
    grid = cfg.grid()
    diag = _Diagnostics(grid, _stiffness(grid), cfg.p, cfg.zeta, True)
    u = cfg.u0.sample(grid, op) / (cfg.u0.amplitude or 1.0)
    z = np.zeros_like(u)
    quad_part = diag.energy(u, z) + diag.potential(u) / (cfg.p + 1)
    pot = diag.potential(u) / (cfg.p + 1)
    # E(A) = A^2 q - A^(p+1) P vanishes at A0 = (q/P)^(1/(p-1))
    A0 = (quad_part / pot) ** (1.0 / (cfg.p - 1))
    return SimConfig(**{**_shallow(cfg), "u0": cfg.u0.scaled(factor * A0 / (cfg.u0.amplitude or 1.0))})


def _shallow(cfg: SimConfig) -> dict:
    return {f: getattr(cfg, f) for f in cfg.__dataclass_fields__}


def l2_error(grid: RadialGrid, a: np.ndarray, b: np.ndarray) -> float:
    d = np.asarray(a) - np.asarray(b)
    return math.sqrt(float(grid.weights @ (d * d)))
