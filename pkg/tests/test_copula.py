import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import integrate

from levyctmc.copula import ClaytonCopula, CopulaMeasure
from levyctmc.models import CGMY, HEM, VG

HEM_A = HEM(lam=3.0, p=0.6, eta1=20.0, eta2=25.0, sigma=0.05)
HEM_B = HEM(lam=5.0, p=0.6, eta1=20.0, eta2=25.0, sigma=0.05)
VG_STD = VG(sigma=0.1, nu=0.06, theta=0.1)


def clayton2(theta=0.7, eta=0.3):
    return ClaytonCopula(theta=theta, eta=eta, d=2)


def test_copula_eval_hand_values():
    cop = ClaytonCopula(theta=1.0, eta=0.3, d=2)
    assert cop(1.0, 1.0) == pytest.approx(0.15, rel=1e-12)
    assert cop(1.0, np.inf) == pytest.approx(0.3, rel=1e-12)
    assert cop(0.0, 5.0) == 0.0
    assert cop(3.0, 0.0) == 0.0
    # opposite-sign quadrant gets the -(1-eta) factor
    assert cop(1.0, -1.0) == pytest.approx(-0.35, rel=1e-12)


def test_copula_grounded_and_bounded():
    cop = clayton2()
    rng = np.random.default_rng(3)
    u = rng.uniform(-5, 5, size=(200, 2))
    vals = cop(u[:, 0], u[:, 1])
    assert np.all(np.abs(vals) <= np.min(np.abs(u), axis=1) + 1e-12)


def measure2(margins=(HEM_A, HEM_B), trunc=None, theta=0.7, eta=0.3):
    return CopulaMeasure(clayton2(theta, eta), list(margins), trunc=trunc)


def test_marginal_consistency_recovers_interval_mass():
    m = measure2()
    got = m.rectangle_mass([(0.09, 0.11), (-np.inf, np.inf)])
    assert_allclose(got, HEM_A.interval_mass(0.09, 0.11), rtol=1e-9)
    assert_allclose(got, 1.8 * (math.exp(-1.8) - math.exp(-2.2)), rtol=1e-9)
    got2 = m.rectangle_mass([(-np.inf, np.inf), (-0.3, -0.1)])
    assert_allclose(got2, HEM_B.interval_mass(-0.3, -0.1), rtol=1e-9)


def test_marginal_consistency_infinite_activity_margin():
    m = measure2(margins=(VG_STD, HEM_A))
    got = m.rectangle_mass([(0.05, 0.2), (-np.inf, np.inf)])
    assert_allclose(got, VG_STD.interval_mass(0.05, 0.2), rtol=1e-9)


def test_empty_box_and_split_additivity():
    m = measure2()
    assert m.rectangle_mass([(0.1, 0.1), (0.2, 0.5)]) == 0.0
    whole = m.rectangle_mass([(0.05, 0.25), (0.1, 0.9)])
    left = m.rectangle_mass([(0.05, 0.15), (0.1, 0.9)])
    right = m.rectangle_mass([(0.15, 0.25), (0.1, 0.9)])
    assert_allclose(left + right, whole, rtol=1e-12)


def test_split_additivity_through_zero():
    # crossing box equals the two halves plus the axis slice
    m = measure2()
    box = [(0.05, 0.25), (-0.3, 0.4)]
    pos = m.rectangle_mass([(0.05, 0.25), (0.0, 0.4)])
    neg = m.rectangle_mass([(0.05, 0.25), (-0.3, 0.0)])
    margin_strip = m.rectangle_mass([(0.05, 0.25), (-np.inf, np.inf)])
    tail_up = m.rectangle_mass([(0.05, 0.25), (0.4, np.inf)])
    tail_dn = m.rectangle_mass([(0.05, 0.25), (-np.inf, -0.3)])
    assert_allclose(m.rectangle_mass(box), margin_strip - tail_up - tail_dn, rtol=1e-10)
    slice_mass = margin_strip - m.rectangle_mass([(0.05, 0.25), (0.0, np.inf)]) - m.rectangle_mass(
        [(0.05, 0.25), (-np.inf, 0.0)]
    )
    assert slice_mass > 0  # finite-activity margin 2 leaves mass on the axis
    assert_allclose(pos + neg + slice_mass, m.rectangle_mass(box), rtol=1e-10)


def clayton_density_pp(m, x1, x2):
    # ++ orthant density: (1+theta) (u1^-t + u2^-t)^(-1/t-2) (u1 u2)^(-t-1) * eta * rho1 rho2
    th = m.copula.theta
    u1 = float(m.margins[0].tail_integral(x1))
    u2 = float(m.margins[1].tail_integral(x2))
    s = u1**-th + u2**-th
    return m.copula.eta * (1 + th) * s ** (-1 / th - 2) * (u1 * u2) ** (-th - 1) * float(
        m.margins[0].density(x1)
    ) * float(m.margins[1].density(x2))


def clayton_density_pm(m, x1, x2):
    # x1 > 0 > x2 quadrant carries the (1 - eta) weight
    th = m.copula.theta
    u1 = float(m.margins[0].tail_integral(x1))
    u2 = abs(float(m.margins[1].tail_integral(x2)))
    s = u1**-th + u2**-th
    return (1 - m.copula.eta) * (1 + th) * s ** (-1 / th - 2) * (u1 * u2) ** (-th - 1) * float(
        m.margins[0].density(x1)
    ) * float(m.margins[1].density(x2))


def test_rectangle_mass_matches_density_quadrature():
    m = measure2()
    oracle, _ = integrate.dblquad(lambda y, x: clayton_density_pp(m, x, y), 0.05, 0.2, 0.1, 0.4)
    assert_allclose(m.rectangle_mass([(0.05, 0.2), (0.1, 0.4)]), oracle, rtol=1e-7)
    oracle_pm, _ = integrate.dblquad(lambda y, x: clayton_density_pm(m, x, y), 0.05, 0.2, -0.4, -0.1)
    assert_allclose(m.rectangle_mass([(0.05, 0.2), (-0.4, -0.1)]), oracle_pm, rtol=1e-7)


def test_truncation_restricts_mass():
    m = measure2(trunc=0.3)
    # outside the cube the measure vanishes
    assert m.rectangle_mass([(0.35, 0.9), (-np.inf, np.inf)]) == 0.0
    # inside it agrees with the untruncated measure when the box is interior,
    # up to the (tiny) mass the truncation removes on the other axis
    full = measure2()
    box_in = [(0.05, 0.2), (0.01, 0.25)]
    assert_allclose(m.rectangle_mass(box_in), full.rectangle_mass(box_in), rtol=1e-12)
    strip = m.rectangle_mass([(0.05, 0.2), (-np.inf, np.inf)])
    assert strip <= full.rectangle_mass([(0.05, 0.2), (-np.inf, np.inf)])


def test_copula_bg_index():
    cg02 = CGMY(c=1.23, g=15.0, m=20.0, y=0.2)
    cg04 = CGMY(c=0.70, g=15.0, m=20.0, y=0.4)
    assert measure2(margins=(cg02, cg04)).bg_index() == 0.4
    # CGMY small-jump exponent is y itself (= 1.1 for this parameter set)
    cg11 = CGMY(c=0.025, g=2.0, m=4.0, y=1.1)
    m3 = CopulaMeasure(ClaytonCopula(0.7, 0.3, d=3), [HEM_A, VG_STD, cg11])
    assert m3.bg_index() == 1.1
    assert measure2(margins=(HEM_A, HEM_A)).bg_index() == 0.0


def test_corner_cancellation_randomized():
    m = measure2(margins=(VG_STD, HEM_B))
    rng = np.random.default_rng(11)
    for _ in range(20):
        a, c = np.sort(rng.uniform(0.01, 1.0, size=2))
        b = rng.uniform(a, c)
        lo2, hi2 = np.sort(rng.uniform(-1.0, -0.01, size=2))
        whole = m.rectangle_mass([(a, c), (lo2, hi2)])
        parts = m.rectangle_mass([(a, b), (lo2, hi2)]) + m.rectangle_mass([(b, c), (lo2, hi2)])
        assert_allclose(parts, whole, rtol=1e-12, atol=1e-16)


def test_three_dimensional_box():
    m3 = CopulaMeasure(ClaytonCopula(0.7, 0.3, d=3), [HEM_A, HEM_B, HEM(lam=20.0, p=0.6, eta1=20.0, eta2=25.0)])
    box = [(0.05, 0.3), (-np.inf, np.inf), (-np.inf, np.inf)]
    assert_allclose(m3.rectangle_mass(box), HEM_A.interval_mass(0.05, 0.3), rtol=1e-9)
    split = [(0.05, 0.3), (0.0, np.inf), (-np.inf, np.inf)]
    assert m3.rectangle_mass(split) < m3.rectangle_mass(box)
