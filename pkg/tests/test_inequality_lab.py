import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypwave import inequality_lab as lab


def test_quadrature_known_integrals():
    q = lab.integrate(lambda x: np.exp(-x), 0.0, 30.0, 1.0)
    assert q.value == pytest.approx(1 - math.exp(-30), rel=1e-12)
    q = lab.integrate(lambda x: 1 / (1e-4 + x) ** 2, 0.0, 1.0, 1e-4)
    assert q.value == pytest.approx(1 / 1e-4 - 1 / (1 + 1e-4), rel=1e-9)
    assert q.change <= lab.RTOL * abs(q.value)


def test_sphere_small_circle():
    r = 1e-6
    assert lab.sphere_integral(2.0, r, 0.5) == pytest.approx(2 * math.pi * r * 2.0**-0.5, rel=1e-8)


def test_sphere_kappa_zero_limit_is_length():
    assert lab.sphere_integral(3.0, 1.0, 1e-12) == pytest.approx(2 * math.pi, rel=1e-9)


@pytest.mark.parametrize("kappa", [2.5, 0.5])
def test_sphere_examples(kappa):
    val, bound = lab.sphere_bound_check(2.0, 1.0, kappa)
    assert val <= bound
    if kappa > 1:
        assert lab.sphere_bound_shape(2.0, 1.0, kappa) == 1.0


def test_sphere_errors():
    with pytest.raises(lab.LemmaError):
        lab.sphere_integral(1.0, 2.0, 0.5)
    with pytest.raises(lab.LemmaError):
        lab.sphere_integral(2.0, 1.0, 1.0)


@settings(max_examples=60, deadline=None)
@given(r=st.floats(1e-2, 10.0), g=st.floats(1e-3, 1e2), kappa=st.floats(0.05, 3.0))
def test_sphere_both_branches_dominate(r, g, kappa):
    if abs(kappa - 1) < 0.02:
        return
    x = r * (1 + g)
    val = lab.sphere_integral(x, r, kappa)
    c = lab.sphere_constant(kappa)
    d = x - r
    near = r * d**-kappa
    far = d ** (1 - kappa) if kappa > 1 else x ** (1 - kappa)
    assert val <= c * near * (1 + 1e-7)
    assert val <= c * far * (1 + 1e-7)


@pytest.mark.parametrize("kappa", [0.3, 0.8, 1.5, 3.0])
def test_fitted_constant(kappa):
    fit = lab.fit_sphere_constant(kappa)
    assert fit.stable
    assert fit.fitted <= fit.proof_constant


def test_two_factor_example():
    val, bound = lab.two_factor_bound_check(1.0, 2.0, 0.5, 1.0)
    assert bound == pytest.approx(4.0)
    assert val == pytest.approx(math.pi / 2, rel=1e-12)
    assert val <= bound


@pytest.mark.parametrize("r1, r2", [(1.0, 2.0), (1.0, 1.001), (5.0, 100.0), (0.01, 3.0)])
def test_two_factor_closed_form(r1, r2):
    val, _ = lab.two_factor_bound_check(r1, r2, 0.5, 1.0)
    assert val == pytest.approx(lab.two_factor_exact_half_one(r1, r2), rel=1e-10)


def test_two_factor_small_r1():
    val, bound = lab.two_factor_bound_check(1e-8, 1.0, 0.5, 1.0)
    assert val < 1e-3 and val <= bound


@settings(max_examples=40, deadline=None)
@given(r1=st.floats(0.01, 10.0), g=st.floats(1e-2, 10.0), k1=st.floats(0.05, 0.95), extra=st.floats(0.05, 2.0),
       lam=st.floats(0.1, 10.0))
def test_two_factor_scaling(r1, g, k1, extra, lam):
    k2 = 1 - k1 + extra
    r2 = r1 * (1 + g)
    v1, b1 = lab.two_factor_bound_check(r1, r2, k1, k2)
    v2, b2 = lab.two_factor_bound_check(lam * r1, lam * r2, k1, k2)
    f = lam ** (1 - k1 - k2)
    assert v2 == pytest.approx(f * v1, rel=1e-7)
    assert b2 == pytest.approx(f * b1, rel=1e-12)


def test_two_factor_errors():
    with pytest.raises(lab.LemmaError):
        lab.two_factor_bound_check(2.0, 1.0, 0.5, 1.0)
    with pytest.raises(lab.LemmaError):
        lab.two_factor_bound_check(1.0, 2.0, 1.2, 1.0)
    with pytest.raises(lab.LemmaError):
        lab.two_factor_bound_check(1.0, 2.0, 0.2, 0.5)


def test_three_factor_collapse():
    for r1, r2, k in [(1.0, 2.0, (0.3, 0.4, 0.5)), (0.5, 0.6, (0.1, 0.2, 1.5))]:
        v3, _ = lab.three_factor_bound_check(r1, r2, r2, *k)
        v2, _ = lab.two_factor_bound_check(r1, r2, k[0], k[1] + k[2])
        assert v3 == pytest.approx(v2, rel=1e-8)


def test_three_factor_small_r1():
    val, bound = lab.three_factor_bound_check(1e-8, 1.0, 2.0, 0.2, 0.3, 0.8)
    assert val < 1e-3 and val <= bound


def test_three_factor_errors():
    with pytest.raises(lab.LemmaError):
        lab.three_factor_bound_check(1.0, 2.0, 1.5, 0.2, 0.3, 0.8)
    with pytest.raises(lab.LemmaError):
        lab.three_factor_bound_check(1.0, 2.0, 3.0, 0.6, 0.5, 0.8)


def test_randomized_errors():
    with pytest.raises(lab.LemmaError):
        lab.randomized_check("sphere", 0, 7)
    with pytest.raises(lab.LemmaError):
        lab.randomized_check("four_factor", 10, 7)


def test_randomized_deterministic():
    a = lab.randomized_check("two_factor", 50, 3)
    b = lab.randomized_check("two_factor", 50, 3)
    assert a == b


def test_three_factor_batch_seed_42():
    rep = lab.randomized_check("three_factor", 1000, 42)
    assert rep.violations == 0 and rep.max_ratio <= 1


@pytest.mark.parametrize("lemma", lab.LEMMAS)
def test_batch_seed_7(lemma):
    rep = lab.randomized_check(lemma, 1000, 7)
    assert rep.passed and rep.max_ratio <= 1
