"""Acceptance criteria, run at their stated tolerances.

Each test records one line via ``acceptance_log``; the lines are printed in
the terminal summary as ``criterion k: PASS/FAIL``.
"""

import math
import time
from fractions import Fraction

import numpy as np
import pytest

from hypwave import admissibility as adm
from hypwave import cone_transform as cone
from hypwave import inequality_lab as lab
from hypwave import solver_euclidean as se
from hypwave import solver_hyperbolic as sh
from hypwave.cli import MORAWETZ_FAMILIES, _p_sweep
from hypwave.geometry import RadialGrid, StatePair
from hypwave.operators import SobolevIndex, build_spectral, linear_propagate, sobolev_norm

RATIO_BAND = (3.2, 4.8)  # "ratio close to 4"


def _record(log, k, ok, detail):
    log.append((k, bool(ok), detail))
    assert ok, detail


def test_criterion_1_linear_oracle(acceptance_log):
    start = time.perf_counter()
    f0 = lambda r: np.exp(-r**2)
    errs = []
    for N in (2000, 4000):
        tr = sh.simulate(sh.SimConfig(n=3, p=3, r_max=20, num_points=N, t_final=10, nonlinear=False))
        s = tr.final
        errs.append(sh.l2_error(s.grid, s.u.values, sh.dalembert_h3(f0, s.grid.points, s.time)))
    elapsed = time.perf_counter() - start
    ratio = errs[0] / errs[1]
    ok = errs[1] <= 1e-3 and RATIO_BAND[0] <= ratio <= RATIO_BAND[1] and elapsed < 60
    _record(acceptance_log, 1, ok, f"err(4000)={errs[1]:.2e} ratio={ratio:.2f} time={elapsed:.1f}s")


def test_criterion_2_energy_conservation(acceptance_log):
    drifts = []
    for N in (2000, 4000):
        tr = sh.simulate(sh.SimConfig(n=3, p=3, zeta=-1, r_max=20, num_points=N, t_final=10))
        assert tr.completed
        drifts.append(float(np.max(np.abs(tr.energy - tr.energy[0])) / abs(tr.energy[0])))
    ratio = drifts[0] / drifts[1]
    ok = drifts[1] <= 1e-4 and RATIO_BAND[0] <= ratio <= RATIO_BAND[1]
    _record(acceptance_log, 2, ok, f"drift(4000)={drifts[1]:.2e} ratio={ratio:.2f}")


def test_criterion_3_morawetz(acceptance_log):
    p = 3.0
    rows, dims = [], set()
    for name, (n, u0, u1) in MORAWETZ_FAMILIES.items():
        cfg = sh.SimConfig(n=n, p=p, zeta=-1, r_max=32, num_points=1601, t_final=20, u0=u0, u1=u1)
        fwd, bwd = sh.simulate_both_directions(cfg)
        assert fwd.completed and bwd.completed and fwd.times[-1] >= 20 - 1e-9
        rep = sh.morawetz_report((fwd, bwd), float(fwd.energy[0]), p)
        assert rep.bound == pytest.approx(8 * rep.energy)
        rows.append((name, rep.margin))
        dims.add(n)
    violations = sum(m <= 0 for _, m in rows)
    ok = len(rows) >= 5 and dims == {2, 3} and violations == 0
    _record(acceptance_log, 3, ok, f"{len(rows)} families, violations={violations}, "
                                   f"min margin={min(m for _, m in rows):.3e}")


def test_criterion_4_focusing_blowup(acceptance_log):
    base = sh.SimConfig(n=3, p=3, zeta=1, r_max=20, num_points=2001, t_final=10, u0=sh.Profile.gaussian(1.0, 0.0, 1.0))
    cfg = sh.scale_to_negative_energy(base, 1.2)
    fwd, bwd = sh.simulate_both_directions(cfg)
    E = float(fwd.energy[0])
    bound = -0.5 * (1 - 0.10)
    slopes, status = [], []
    for tr in (fwd, bwd):
        v = sh.virial_monitor(tr, E, 3.0)
        slopes.append(v.max_slope)
        status.append(tr.status)
    ok = E < 0 and all(s == sh.BLOWUP for s in status) and all(s <= bound for s in slopes)
    _record(acceptance_log, 4, ok, f"E={E:.3f} status={status} slopes={[round(s, 3) for s in slopes]}")


def test_criterion_5_admissibility_tables(acceptance_log):
    start = time.perf_counter()
    worst, bad_pairs, count = 0.0, 0, 0
    for n in range(2, 7):
        for pv in _p_sweep(n, 50):
            r = adm.min_sigma(pv, n)
            worst = max(worst, abs(r.sigma - r.closed_form))
            cf = adm.sigma_closed_form(pv, n)
            s = cf.value if cf.attained else cf.value + Fraction(1, 10**9)
            eps = None
            if n == 2 and cf.row == "sigma_3":
                eps = min(2 - (1 - s) * (adm._as_fraction(pv) - 1), Fraction(1, 3)) / 2
            pair = adm.table_pair(pv, n, s, eps)
            ok_pair = pair is not None and adm.is_compatible(
                adm.PairQuery.from_exponents(pair[0], pair[1], n, s, adm._as_fraction(pv)))
            bad_pairs += not ok_pair
            count += 1
    elapsed = time.perf_counter() - start
    ok = count == 250 and worst <= 1e-6 and bad_pairs == 0
    _record(acceptance_log, 5, ok, f"{count} cases, max |min_sigma - closed form|={worst:.1e}, "
                                   f"incompatible table pairs={bad_pairs}, time={elapsed:.1f}s")


def test_criterion_6_cone_correspondence(acceptance_log):
    prof = se.DecayProfile(1.0, 0.5, 1.0)
    data = se.DecayingData(prof, r_cut=10)
    t0 = -1.5
    res, sp = [], None
    for N, k in ((601, 0.04), (1201, 0.02), (2401, 0.01)):
        cfg = se.QuinticConfig(r_max=24.0, num_points=N, t_final=2.5, t_backward=1.2)
        sp = se.simulate_quintic(cfg, data.u0, data.u1, support=data.support).interpolant()
        res.append(cone.shifted_wave_residual(sp, t0, k=k).max_residual)
    ratios = [a / b for a, b in zip(res[:-1], res[1:])]
    slab = cone.slab_identity(sp, t0, (-1.0, 0.0), 2.0)
    ok = all(RATIO_BAND[0] <= q <= RATIO_BAND[1] for q in ratios) and slab.relative <= 1e-4
    _record(acceptance_log, 6, ok, f"residuals={[f'{x:.2e}' for x in res]} "
                                   f"ratios={[round(q, 2) for q in ratios]} slab rel={slab.relative:.1e}")


def test_criterion_7_decay_constants(acceptance_log):
    prof = se.DecayProfile(1.0, 0.5, 1.0, 0.09)
    data = se.DecayingData(prof, r_cut=20)
    trs = []
    for N in (1201, 2401):
        cfg = se.QuinticConfig(r_max=60, num_points=N, t_final=15, t_backward=1.5)
        trs.append(se.simulate_quintic(cfg, data.u0, data.u1, support=data.support))
    b1 = se.decay_check(trs[0], prof, trs[1], 0.2)
    der = se.derivative_decay_check(trs[0], prof, trs[1], 0.2)
    reps = (b1, der.weighted_characteristic, der.incoming, der.outgoing)
    consts = [r.constant for r in reps]
    changes = [r.relative_change for r in reps]
    ok = all(math.isfinite(c) for c in consts) and all(c <= 0.2 for c in changes)
    _record(acceptance_log, 7, ok, f"constants={[round(c, 3) for c in consts]} "
                                   f"changes={[round(c, 3) for c in changes]}")


def test_criterion_8_inequality_lab(acceptance_log):
    reports = [lab.randomized_check(name, 1000, 7) for name in lab.LEMMAS]
    # the two-factor bound uses the explicit constant verbatim
    _, bound = lab.two_factor_bound_check(1.0, 3.0, 0.25, 1.5)
    assert bound == pytest.approx((1 / 0.75 + 1 / 0.75) * 2.0 ** -0.75, rel=1e-15)
    ok = all(r.samples == 1000 and r.violations == 0 for r in reports)
    _record(acceptance_log, 8, ok, " ".join(f"{r.lemma_id}: {r.violations} violations (max ratio "
                                            f"{r.max_ratio:.3f})" for r in reports))


def test_criterion_9_spectral_calculus(acceptance_log):
    op = build_spectral(RadialGrid(3, 20.0, 512))
    worst = 0.0
    for k, sigma, tau in [(0, 0.5, 0.5), (4, 0.7, 0.3), (30, -0.2, 1.2), (7, 1.0, -0.5), (100, 2.0, 1.0)]:
        mu = op.eigenvalues[k]
        expected = (mu - op.rho2) ** (tau / 2) * (mu + 1) ** (sigma / 2)
        got = sobolev_norm(op.eigenfunction(k), SobolevIndex(sigma, tau), op)
        worst = max(worst, abs(got / expected - 1))
    rng = np.random.default_rng(0)
    s = StatePair.from_arrays(op.grid, op.synthesize(rng.normal(size=op.size)), op.synthesize(rng.normal(size=op.size)))

    def energy(st):
        return 0.5 * sobolev_norm(st.u, SobolevIndex(0, 1), op) ** 2 + 0.5 * sobolev_norm(st.ut, SobolevIndex(0, 0), op) ** 2

    E0 = energy(s)
    drift = max(abs(energy(linear_propagate(s, t, op)) / E0 - 1) for t in np.linspace(0.5, 20, 9))
    ok = worst <= 1e-10 and drift <= 1e-12
    _record(acceptance_log, 9, ok, f"mode norm rel err={worst:.1e} propagator drift={drift:.1e}")
