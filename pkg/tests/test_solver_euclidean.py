import math

import numpy as np
import pytest
from scipy import integrate

from hypwave import solver_euclidean as se


def test_energy_zero_state():
    g = se.EuclideanGrid(5.0, 101)
    z = np.zeros(101)
    assert se.energy_2d(se.EuclideanState(g, z, z)) == 0.0


def test_energy_against_cartesian_quadrature():
    g = se.EuclideanGrid(10.0, 8001)
    u = np.exp(-g.points**2)
    E = se.energy_2d(se.EuclideanState(g, u, 0 * u))

    def dens(y, x):
        q = x * x + y * y
        return 0.5 * 4 * q * np.exp(-2 * q) + np.exp(-6 * q) / 6

    ref = integrate.dblquad(dens, -8, 8, -8, 8, epsabs=1e-13, epsrel=1e-13)[0]
    assert abs(E - ref) < 1e-6


def test_energy_scales_like_data_class():
    # E is controlled by A^2 + A^6 for data in the decay class
    ratios = []
    g = se.EuclideanGrid(60.0, 3001)
    for A in (0.01, 0.1, 0.5, 1.0, 2.0, 4.0, 10.0):
        d = se.DecayingData(se.DecayProfile(A, 0.5), r_cut=20.0)
        E = se.energy_2d(se.EuclideanState(g, d.u0(g.points), d.u1(g.points)))
        ratios.append(E / (A**2 + A**6))
    # the ratio stays bounded over three decades of amplitude
    assert max(ratios) <= 1.0
    assert ratios[0] == pytest.approx(ratios[1], rel=0.05)


def test_decay_profile_validation():
    assert se.DecayProfile(1.0, 0.5).delta == pytest.approx(0.05)
    assert se.DecayProfile(1.0, 0.5, 1.0, 0.09).delta == 0.09
    with pytest.raises(se.EuclideanError):
        se.DecayProfile(1.0, 0.05, 1.0, 0.06)
    with pytest.raises(se.EuclideanError):
        se.DecayProfile(-1.0, 0.5)


def test_data_obeys_bounds():
    d = se.DecayingData(se.DecayProfile(1.0, 0.5), r_cut=10.0)
    r = np.linspace(0, 40, 40001)
    assert d.check_bounds(r)
    assert np.all(d.u0(r[r >= 20.0]) == 0) and np.all(d.u1(r[r >= 20.0]) == 0)
    assert d.support == 20.0


def test_smooth_step():
    x = np.linspace(-1, 2, 301)
    s = se.smooth_step(x)
    assert np.all(s[x <= 0] == 0) and np.all(s[x >= 1] == 1)
    assert np.all(np.diff(s) >= 0)


def test_mollify_constant():
    assert np.allclose(se.mollify(lambda r: np.ones_like(r), 0.3, [0.0, 1.0, 2.5]), 1.0, atol=1e-12)


@pytest.mark.parametrize(
    "u0, u1, F, expected",
    [
        (lambda r: np.ones_like(r), None, None, lambda t: 1.0),
        (None, lambda r: np.ones_like(r), None, lambda t: t),
        (None, None, lambda r, s: np.ones_like(r), lambda t: t * t / 2),
        (None, None, None, lambda t: 0.0),
    ],
)
def test_linear_representation_trivial(u0, u1, F, expected):
    for t in (0.5, 2.0):
        assert se.linear_representation(u0, u1, F, 1.3, t) == pytest.approx(expected(t), abs=1e-9)


def test_zero_run():
    cfg = se.QuinticConfig(r_max=10.0, num_points=201, t_final=2.0)
    tr = se.simulate_quintic(cfg, lambda r: 0 * r, lambda r: 0 * r, support=1.0)
    assert np.all(tr.U == 0) and np.all(tr.series_energy == 0)


def test_linear_run_matches_kernel():
    f0 = lambda r: np.exp(-r**2)
    f1 = lambda r: 0.5 * np.exp(-(r - 1) ** 2)
    errs = []
    for N in (601, 1201):
        tr = se.simulate_quintic(se.QuinticConfig(r_max=12.0, num_points=N, t_final=2.0, nonlinear=False),
                                 f0, f1, support=7.0)
        k = int(np.argmin(np.abs(tr.times - 2.0)))
        e = []
        for x in (0.0, 0.5, 1.5, 3.0):
            i = int(round(x / tr.grid.h))
            e.append(tr.U[k, i] - se.linear_representation(f0, f1, None, tr.grid.points[i], tr.times[k]))
        errs.append(max(abs(v) for v in e))
    assert 3.2 <= errs[0] / errs[1] <= 4.8


def test_energy_drift_refinement():
    f0 = lambda r: np.exp(-r**2)
    drift = []
    for N in (801, 1601):
        tr = se.simulate_quintic(se.QuinticConfig(r_max=20.0, num_points=N, t_final=6.0), f0, None, support=6.0)
        drift.append(np.max(np.abs(tr.series_energy - tr.series_energy[0])) / tr.series_energy[0])
    assert drift[1] < 1e-3
    assert 3.2 <= drift[0] / drift[1] <= 4.8


def test_r_valid():
    tr = se.simulate_quintic(se.QuinticConfig(r_max=10.0, num_points=201, t_final=1.0), lambda r: 0 * r, None, support=2.0)
    assert tr.r_valid(0.5) == pytest.approx(2 * 10.0 - 2.0 - 0.5)
    tr2 = se.simulate_quintic(se.QuinticConfig(r_max=10.0, num_points=201, t_final=1.0), lambda r: 0 * r, None)
    assert tr2.r_valid(0.5) == pytest.approx(9.5)


@pytest.fixture(scope="module")
def decay_runs():
    prof = se.DecayProfile(1.0, 0.5, 1.0, 0.09)
    data = se.DecayingData(prof, r_cut=10.0)
    runs = []
    for N in (601, 1201):
        cfg = se.QuinticConfig(r_max=30.0, num_points=N, t_final=8.0, t_backward=1.0)
        runs.append(se.simulate_quintic(cfg, data.u0, data.u1, support=data.support))
    return prof, runs


def test_decay_constants_stable(decay_runs):
    prof, (a, b) = decay_runs
    rep = se.decay_check(a, prof, b)
    assert math.isfinite(rep.constant) and rep.stable
    der = se.derivative_decay_check(a, prof, b)
    assert all(math.isfinite(c) for c in der.constants) and der.stable


def test_decay_at_time_zero_bounded_by_data(decay_runs):
    prof, (a, _) = decay_runs
    k = int(np.argmin(np.abs(a.times)))
    r = a.grid.points
    m = r > prof.R
    sup = np.max(np.abs(a.U[k, m]) * np.sqrt(r[m]) * r[m] ** prof.delta * (1 + r[m]) ** -prof.delta)
    bound = np.max(prof.envelope(r[m]) * np.sqrt(r[m]))
    assert sup <= bound


def test_reduction_residual_second_order(decay_runs):
    prof, runs = decay_runs
    res = [se.reduction_residual(t, prof.R).max_residual for t in runs]
    assert 3.2 <= res[0] / res[1] <= 4.8


def test_zero_solution_decay_constants():
    prof = se.DecayProfile(1.0, 0.5)
    tr = se.simulate_quintic(se.QuinticConfig(r_max=10.0, num_points=201, t_final=2.0), lambda r: 0 * r, None, support=1.0)
    assert se.decay_check(tr, prof).constant == 0
    assert se.derivative_decay_check(tr, prof).constants == (0.0, 0.0, 0.0)
    assert se.reduction_residual(tr, 1.0).max_residual == 0


def test_outgoing_pulse_far_field():
    # an outgoing linear pulse: u_t + u_r is much smaller than u_t - u_r far out
    f0 = lambda r: np.exp(-(r**2))
    tr = se.simulate_quintic(se.QuinticConfig(r_max=40.0, num_points=2001, t_final=15.0, nonlinear=False), f0, None,
                             support=6.0)
    k = len(tr.times) - 1
    r = tr.grid.points
    ur = np.gradient(tr.U[k], tr.grid.h)
    m = (r > 10.0) & (r < 20.0)
    inc = np.max(np.abs(tr.UT[k, m] + ur[m]))
    out = np.max(np.abs(tr.UT[k, m] - ur[m]))
    assert inc < 0.2 * out


def test_config_errors():
    with pytest.raises(se.EuclideanError):
        se.QuinticConfig(r_max=10.0, num_points=100, t_final=1.0, dt_ratio=0.8)
    with pytest.raises(se.EuclideanError):
        se.linear_representation(None, None, None, 1.0, 0.0)
