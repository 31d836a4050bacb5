import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import integrate

from levyctmc.models import CGMY, HEM, VG, TruncatedMeasure1D, tail_integral_quad

HEM_STD = HEM(lam=3.0, p=0.6, eta1=20.0, eta2=25.0, sigma=0.05)
VG_STD = VG(sigma=0.1, nu=0.06, theta=0.1)
CGMY15 = CGMY(c=0.007, g=2.0, m=4.0, y=1.5)

ALL_MODELS = [HEM_STD, VG_STD, CGMY15, CGMY(c=1.23, g=15.0, m=20.0, y=0.2)]


def quad_mass(model, a, b):
    val, _ = integrate.quad(lambda t: float(model.density(t)), a, b, epsabs=1e-13, epsrel=1e-12, limit=300)
    return val


def test_hem_negative_tail_closed_form():
    # oracle: adaptive quadrature of the HEM density over (-inf, -0.2]
    assert_allclose(HEM_STD.tail_integral(-0.2), tail_integral_quad(HEM_STD, -0.2), rtol=1e-10)
    assert_allclose(HEM_STD.tail_integral(-0.2), -1.2 * math.exp(-5.0), rtol=1e-12)
    assert_allclose(HEM_STD.tail_integral(-0.2), -0.008085536, rtol=1e-6)


@pytest.mark.parametrize("model", ALL_MODELS)
def test_tail_vanishes_at_infinity(model):
    assert model.tail_integral(80.0) == pytest.approx(0.0, abs=1e-12)
    assert model.tail_integral(-80.0) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("model", ALL_MODELS)
@pytest.mark.parametrize("x", [0.05, 0.3, 0.5, -0.07, -0.4])
def test_tail_matches_quadrature(model, x):
    assert_allclose(model.tail_integral(x), tail_integral_quad(model, x), rtol=1e-8)


def test_tail_rejects_zero():
    with pytest.raises(ValueError):
        HEM_STD.tail_integral(0.0)


def test_hem_interval_mass_closed_form():
    got = HEM_STD.interval_mass(0.09, 0.11)
    assert_allclose(got, 1.8 * (math.exp(-1.8) - math.exp(-2.2)), rtol=1e-12)
    assert_allclose(got, 0.098093, rtol=1e-4)
    assert_allclose(got, quad_mass(HEM_STD, 0.09, 0.11), rtol=1e-10)


@pytest.mark.parametrize("model", ALL_MODELS)
def test_interval_mass_degenerate_and_additive(model):
    assert model.interval_mass(0.2, 0.2) == 0.0
    rng = np.random.default_rng(7)
    for _ in range(25):
        a, b, c = np.sort(rng.uniform(0.01, 2.0, size=3))
        if a == b or b == c:
            continue
        lhs = model.interval_mass(a, b) + model.interval_mass(b, c)
        assert_allclose(lhs, model.interval_mass(a, c), rtol=1e-12, atol=1e-300)
        lhs = model.interval_mass(-c, -b) + model.interval_mass(-b, -a)
        assert_allclose(lhs, model.interval_mass(-c, -a), rtol=1e-12, atol=1e-300)


def test_interval_mass_rejects_straddling():
    with pytest.raises(ValueError):
        HEM_STD.interval_mass(-0.1, 0.1)


@pytest.mark.parametrize("model", ALL_MODELS)
def test_tail_splits_through_far_point(model):
    # tail(x) = interval_mass(x, X_big) + tail(X_big) with X_big = 50/decay
    for x, big in [(0.12, 2.5), (-0.12, -2.0)]:
        if x > 0:
            lhs = model.interval_mass(x, big) + model.tail_integral(big)
        else:
            lhs = -model.interval_mass(big, x) + model.tail_integral(big)
        assert_allclose(lhs, model.tail_integral(x), rtol=1e-10)


def test_hem_second_moment_bound_and_sigma_independence():
    for h in [0.5, 0.1, 0.01]:
        v = HEM_STD.truncated_second_moment(h)
        assert v <= HEM_STD.lam * (h / 2) ** 2 * (1 + 1e-12)
        assert v == HEM(lam=3.0, p=0.6, eta1=20.0, eta2=25.0, sigma=0.0).truncated_second_moment(h)


def test_cgmy_second_moment_scaling():
    h = 1e-3
    ratio = CGMY15.truncated_second_moment(h) / CGMY15.truncated_second_moment(h / 2)
    assert abs(ratio - 2.0**0.5) < 0.05 * 2.0**0.5
    # log2 of the ratio approaches 2 - y
    assert abs(math.log2(ratio) - (2.0 - CGMY15.y)) < 0.05


def test_vg_second_moment_matches_quadrature():
    h = 0.02
    oracle = quad_mass_x2(VG_STD, h / 2)
    assert_allclose(VG_STD.truncated_second_moment(h), oracle, rtol=1e-6)


def quad_mass_x2(model, a):
    val, _ = integrate.quad(lambda t: t * t * float(model.density(t)), 0.0, a, epsabs=1e-15, epsrel=1e-11, limit=300)
    neg, _ = integrate.quad(lambda t: t * t * float(model.density(t)), -a, 0.0, epsabs=1e-15, epsrel=1e-11, limit=300)
    return val + neg


@pytest.mark.parametrize("model", ALL_MODELS)
def test_second_moment_nondecreasing(model):
    hs = [1e-3, 1e-2, 0.1, 0.5, 1.0]
    vals = [model.truncated_second_moment(h) for h in hs]
    assert all(v2 >= v1 for v1, v2 in zip(vals, vals[1:]))


def test_bg_index_catalog():
    assert CGMY15.bg_index() == 1.5
    assert HEM_STD.bg_index() == 0.0
    assert VG_STD.bg_index() == 0.0


@pytest.mark.parametrize("model", ALL_MODELS)
def test_first_moment_matches_quadrature(model):
    for a, b in [(0.05, 0.6), (-0.7, -0.04)]:
        oracle, _ = integrate.quad(lambda t: t * float(model.density(t)), a, b, epsabs=1e-14, epsrel=1e-11, limit=300)
        assert_allclose(model.first_moment(a, b), oracle, rtol=1e-8)


def test_truncated_measure():
    t = TruncatedMeasure1D(HEM_STD, R=0.5)
    assert t.tail_integral(0.6) == 0.0
    assert t.tail_integral(-0.7) == 0.0
    assert_allclose(t.interval_mass(0.1, 0.2), HEM_STD.interval_mass(0.1, 0.2), rtol=1e-12)
    assert_allclose(t.interval_mass(0.4, 0.9), HEM_STD.interval_mass(0.4, 0.5), rtol=1e-12)
    assert_allclose(t.mass_outside(0.01), HEM_STD.interval_mass(0.01, 0.5) + HEM_STD.interval_mass(-0.5, -0.01), rtol=1e-12)
    assert t.bg_index() == 0.0
    assert t.diffusion_vol == HEM_STD.sigma


def test_hem_total_mass_is_lambda():
    # finite activity: mass of R \ {0} equals the jump intensity
    assert_allclose(HEM_STD.positive_tail(0.0) + HEM_STD.negative_tail(0.0), 3.0, rtol=1e-14)


def test_infinite_activity_blows_up_at_zero():
    assert VG_STD.positive_tail(0.0) == np.inf
    assert CGMY15.negative_tail(0.0) == np.inf
