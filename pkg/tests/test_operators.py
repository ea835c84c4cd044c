import dataclasses
import logging
import math

import numpy as np
import pytest

from hypwave.geometry import RadialGrid, StatePair, integrate_radial
from hypwave.operators import (
    RadialStiffness,
    SobolevIndex,
    SpectralError,
    build_spectral,
    close_boundary,
    density_growth_check,
    harish_chandra_density,
    linear_propagate,
    lq_norm,
    pair_norm,
    sobolev_norm,
)


@pytest.fixture(scope="module")
def op3():
    return build_spectral(RadialGrid(3, 20.0, 512))


def test_bottom_and_low_modes(op3):
    k = np.arange(1, 11)
    exact = 1 + (k * math.pi / 20) ** 2
    assert np.max(np.abs(op3.eigenvalues[:10] / exact - 1)) < 1e-3
    # smallest eigenvalue sits O(h^2) above rho^2 = 1
    assert 0 < op3.eigenvalues[0] - 1 < 0.03


def test_low_resolution(caplog):
    with caplog.at_level(logging.WARNING):
        op = build_spectral(RadialGrid(3, 5.0, 8))
    assert op.low_resolution
    assert not build_spectral(RadialGrid(3, 5.0, 100)).low_resolution


def test_orthonormal(op3):
    assert op3.gram_defect() < 1e-12


def test_stiffness_symmetric_form():
    g = RadialGrid(2, 6.0, 300)
    K = RadialStiffness(g)
    rng = np.random.default_rng(1)
    u = close_boundary(rng.normal(size=300))
    v = close_boundary(rng.normal(size=300))
    lhs = float((K.mass * K.neg_laplacian(u)[1:-1]) @ v[1:-1])
    rhs = float((K.mass * K.neg_laplacian(v)[1:-1]) @ u[1:-1])
    assert lhs == pytest.approx(rhs, rel=1e-10)
    assert K.quadratic_form(u) == pytest.approx(float((K.mass * K.neg_laplacian(u)[1:-1]) @ u[1:-1]), rel=1e-10)


def test_sobolev_identity_is_l2(op3):
    f = op3.grid.sample(lambda r: np.exp(-r * r))
    f = op3.grid.field(close_boundary(f.values))
    l2 = math.sqrt(integrate_radial(f.grid.field(f.values**2)))
    assert sobolev_norm(f, SobolevIndex(0, 0), op3) == pytest.approx(l2, rel=1e-12)
    assert sobolev_norm(op3.grid.field(np.zeros(512)), SobolevIndex(0.3, 0.4), op3) == 0.0


@pytest.mark.parametrize("k, sigma, tau", [(0, 0.5, 0.5), (4, 0.7, 0.3), (30, -0.2, 1.2), (7, 1.0, -0.5)])
def test_single_mode_norm(op3, k, sigma, tau):
    mu = op3.eigenvalues[k]
    expected = (mu - 1) ** (tau / 2) * (mu + 1) ** (sigma / 2)
    assert sobolev_norm(op3.eigenfunction(k), SobolevIndex(sigma, tau), op3) == pytest.approx(expected, rel=1e-10)


def test_tau_bound():
    with pytest.raises(ValueError):
        SobolevIndex(0.0, 1.5)


def test_negative_tau_at_bottom(op3):
    # pretend the lowest mode was clamped onto rho^2
    mu = op3.eigenvalues.copy()
    mu[0] = op3.rho2
    mask = np.zeros(op3.size, dtype=bool)
    mask[0] = True
    op = dataclasses.replace(op3, eigenvalues=mu, clamped=mask)
    with pytest.raises(SpectralError, match="spectral bottom"):
        sobolev_norm(op.eigenfunction(0), SobolevIndex(0.0, -0.5), op)
    assert sobolev_norm(op.eigenfunction(1), SobolevIndex(0.0, -0.5), op) > 0


def test_propagate_identity_and_mode(op3):
    g = op3.grid
    rng = np.random.default_rng(3)
    s = StatePair.from_arrays(g, op3.synthesize(rng.normal(size=op3.size)), op3.synthesize(rng.normal(size=op3.size)))
    same = linear_propagate(s, 0.0, op3)
    assert np.allclose(same.u.values, s.u.values, atol=1e-13)
    assert np.allclose(same.ut.values, s.ut.values, atol=1e-13)
    e = op3.eigenfunction(5)
    out = linear_propagate(StatePair(e, g.field(np.zeros(g.num_points))), 2.3, op3)
    assert np.allclose(out.u.values, math.cos(2.3 * op3.lam[5]) * e.values, atol=1e-12)


def test_propagator_conserves_energy(op3):
    g = op3.grid
    rng = np.random.default_rng(0)
    s = StatePair.from_arrays(g, op3.synthesize(rng.normal(size=op3.size)), op3.synthesize(rng.normal(size=op3.size)))

    def energy(st):
        return 0.5 * sobolev_norm(st.u, SobolevIndex(0, 1), op3) ** 2 + 0.5 * sobolev_norm(st.ut, SobolevIndex(0, 0), op3) ** 2

    E0 = energy(s)
    for t in np.linspace(0.5, 10, 7):
        assert abs(energy(linear_propagate(s, t, op3)) / E0 - 1) < 1e-12


def test_pair_norm_of_zero(op3):
    assert pair_norm(StatePair.zeros(op3.grid), 0.5, op3) == 0.0


def test_lq_norm():
    g = RadialGrid(2, 1.0, 2001)
    one = g.field(np.ones(2001))
    assert lq_norm(one, 1) == pytest.approx(2 * math.pi * (math.cosh(1) - 1), rel=1e-6)
    assert lq_norm(g.field(np.zeros(2001)), 3) == 0.0
    with pytest.raises(ValueError):
        lq_norm(one, 0.5)


def test_lq_two_matches_sobolev(op3):
    f = op3.grid.field(close_boundary(np.exp(-op3.grid.points**2)))
    assert lq_norm(f, 2) == pytest.approx(sobolev_norm(f, SobolevIndex(0, 0), op3), rel=1e-12)


def test_density():
    assert harish_chandra_density(0.0, 3) == 0.0
    for lam in (0.1, 1.0, 7.5):
        assert harish_chandra_density(lam, 3) == pytest.approx(lam**2, rel=1e-12)
    small = [harish_chandra_density(x, 2) / x**2 for x in (1e-2, 1e-3, 1e-4)]
    assert max(small) < 10


@pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
def test_density_growth(n):
    rep = density_growth_check(n)
    assert math.isfinite(rep.sup_ratio) and rep.inf_ratio_above_one > 0
