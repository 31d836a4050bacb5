import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import stats

from levyctmc.copula import ClaytonCopula, CopulaMeasure
from levyctmc.grid import (
    GridSpec,
    build_jump_table,
    choose_truncation_by_mass,
    mu_h_lambda_exact,
    params_from_eps,
    small_jump_cov,
    truncate_measure,
)
from levyctmc.models import CGMY, HEM

HEM_STD = HEM(lam=3.0, p=0.6, eta1=20.0, eta2=25.0, sigma=0.05)
CGMY15 = CGMY(c=0.007, g=2.0, m=4.0, y=1.5)


def hem_table(h=0.02, R=1.0, **kw):
    return build_jump_table(HEM_STD, GridSpec(h=h, R=R, **kw))


def test_cell_mass_matches_interval_mass():
    table = hem_table()
    idx = table.state_index((5,))  # s = 0.1
    assert idx >= 0
    assert_allclose(table.masses[idx], HEM_STD.interval_mass(0.09, 0.11), rtol=1e-10)
    assert_allclose(table.masses[idx], 0.098093, rtol=1e-4)


def test_total_rate_matches_measure():
    table = hem_table()
    assert_allclose(table.total_rate, table.masses.sum(), rtol=0)  # bit-exact by construction
    expected = table.measure_t.mass_outside(table.h / 2)
    assert_allclose(table.total_rate + table.dropped_mass, expected, rtol=1e-9)


def test_symmetric_measure_zero_compensator():
    sym = CGMY(c=0.007, g=4.0, m=4.0, y=1.5)
    table = build_jump_table(sym, GridSpec(h=0.01, R=1.0))
    assert abs(table.mu_h_lambda[0]) < 1e-12 * table.total_rate
    assert_allclose(table.mu_tilde, 0.0, atol=1e-14)


def test_mu_h_marginal_equals_exact_1d():
    table = hem_table()
    assert_allclose(table.mu_h_lambda, mu_h_lambda_exact(table), rtol=0, atol=0)


def test_mu_h_marginal_equals_exact_2d():
    m = CopulaMeasure(ClaytonCopula(0.7, 0.3, d=2), [HEM_STD, HEM(lam=5.0, p=0.6, eta1=20.0, eta2=25.0)])
    table = build_jump_table(m, GridSpec(h=0.25, R=1.0, d=2))
    assert_allclose(table.mu_h_lambda, mu_h_lambda_exact(table), rtol=1e-9, atol=1e-14)


def test_2d_lattice_masses_match_scalar_boxes():
    m = CopulaMeasure(ClaytonCopula(0.7, 0.3, d=2), [HEM_STD, HEM(lam=5.0, p=0.6, eta1=20.0, eta2=25.0)])
    table = build_jump_table(m, GridSpec(h=0.25, R=1.0, d=2))
    rng = np.random.default_rng(0)
    for i in rng.choice(table.states.shape[0], size=12, replace=False):
        assert_allclose(table.masses[i], table.cell_mass_from_measure(table.states[i]), rtol=1e-10, atol=1e-18)
    # total over the table equals the measure's mass off the central cell
    whole = m.truncated(table.grid.r_eff)
    strip1 = whole.rectangle_mass([(-np.inf, np.inf), (-np.inf, np.inf)])
    assert not np.isfinite(strip1) or strip1 > 0  # full-box query is out of contract; just exercise cells
    off_center = sum(
        table.cell_mass_from_measure(s) for s in [(1, 0), (0, 1), (-1, 0), (0, -1), (1, 1), (-1, -1)]
    )
    assert off_center > 0


def test_state_cap_guard():
    with pytest.raises(MemoryError):
        m = CopulaMeasure(ClaytonCopula(0.7, 0.3, d=2), [HEM_STD, HEM_STD])
        build_jump_table(m, GridSpec(h=1e-4, R=1.0, d=2, state_cap=10_000))


def test_sampler_chi_square_and_cost():
    table = hem_table(h=0.05, R=1.0)  # well under 200 states
    n_states = table.states.shape[0]
    assert n_states <= 200
    rng = np.random.default_rng(42)
    draws = table.sampler.draw(rng, 1_000_000)
    counts = np.bincount(draws, minlength=n_states)
    expected = 1_000_000 * table.masses / table.total_rate
    keep = expected > 5
    stat = float(np.sum((counts[keep] - expected[keep]) ** 2 / expected[keep]))
    extra = counts[~keep].sum()
    pval = stats.chi2.sf(stat, df=keep.sum() - 1)
    assert pval > 0.01
    assert extra <= 60  # the thin cells carry almost no mass
    # instrumented draw cost within the tree bound
    tree = build_jump_table(HEM_STD, GridSpec(h=0.05, R=1.0, sampler_method="cdf"))
    bound = math.ceil(1 * math.log2(2 * table.grid.r_eff / table.h + 1)) + 2
    assert tree.sampler.ops_per_draw <= bound
    assert table.sampler.ops_per_draw <= bound


def test_cdf_sampler_matches_alias_distribution():
    table = hem_table(h=0.1, R=1.0, sampler_method="cdf")
    rng = np.random.default_rng(1)
    draws = table.sampler.draw(rng, 200_000)
    freq = np.bincount(draws, minlength=table.states.shape[0]) / 200_000
    assert np.max(np.abs(freq - table.masses / table.total_rate)) < 4e-3


def test_small_jump_cov_1d_scaling():
    vals = {}
    for h in [1e-2, 5e-3, 2.5e-3]:
        measure_t = truncate_measure(CGMY15, 1.0)
        vals[h] = small_jump_cov(measure_t, GridSpec(h=h, R=1.0))[0, 0]
    ratios = [vals[1e-2] / 1e-2**0.5, vals[5e-3] / 5e-3**0.5, vals[2.5e-3] / 2.5e-3**0.5]
    assert max(ratios) / min(ratios) < 1.10


def test_small_jump_cov_finite_activity_bound():
    h = 0.01
    measure_t = truncate_measure(HEM_STD, 1.0)
    c = small_jump_cov(measure_t, GridSpec(h=h, R=1.0))[0, 0]
    sup_density = max(float(HEM_STD.density(1e-9)), float(HEM_STD.density(-1e-9)))
    assert c <= sup_density * h**3 / 12 * 1.001


def test_c_h_residual_reporting():
    m = CopulaMeasure(ClaytonCopula(0.7, 0.3, d=2), [HEM_STD, HEM(lam=5.0, p=0.6, eta1=20.0, eta2=25.0)])
    table = build_jump_table(m, GridSpec(h=0.2, R=1.0, d=2))
    resid = table.c_h_residual()
    assert 0.0 <= resid < np.max(np.abs(table.C_h)) + 1e-12
    table1d = hem_table(h=0.05, R=1.0)
    assert table1d.c_h_residual() == 0.0


def test_small_jump_cov_2d_psd_and_consistency():
    m = CopulaMeasure(ClaytonCopula(0.7, 0.3, d=2), [HEM_STD, HEM(lam=5.0, p=0.6, eta1=20.0, eta2=25.0)])
    grid = GridSpec(h=0.2, R=1.0, d=2)
    c = small_jump_cov(truncate_measure(m, 1.0), grid)
    assert_allclose(c, c.T)
    w = np.linalg.eigvalsh(c)
    assert w.min() >= -1e-14
    # each diagonal entry approximates the margin strip second moment;
    # check against a finer Riemann refinement
    fine = small_jump_cov(truncate_measure(m, 1.0), GridSpec(h=0.2, R=1.0, d=2, subcells=32))
    assert_allclose(c, fine, rtol=0.02, atol=1e-10)


def test_v_zero_requires_finite_variation():
    with pytest.raises(ValueError):
        build_jump_table(CGMY15, GridSpec(h=0.01, R=1.0, V=0.0))
    t = build_jump_table(CGMY(c=1.23, g=15.0, m=20.0, y=0.2), GridSpec(h=0.01, R=1.0, V=0.0))
    assert t.C_h[0, 0] == 0.0
    assert t.mu_tilde.shape == (1,)


def test_mu_tilde_quadrature_1d():
    grid = GridSpec(h=0.02, R=2.0)
    table = build_jump_table(HEM_STD, grid)
    from scipy import integrate

    oracle_pos, _ = integrate.quad(lambda x: x * float(HEM_STD.density(x)), 1.0, grid.r_eff, epsrel=1e-12)
    oracle_neg, _ = integrate.quad(lambda x: x * float(HEM_STD.density(x)), -grid.r_eff, -1.0, epsrel=1e-12)
    assert_allclose(table.mu_tilde[0], oracle_pos + oracle_neg, rtol=1e-9)


def test_mu_tilde_zero_when_r_below_v():
    table = hem_table(h=0.02, R=0.5)
    assert_allclose(table.mu_tilde, 0.0)


def test_choose_truncation():
    r1 = choose_truncation_by_mass(HEM_STD, h=1e-3)
    # quadrature re-check of the coverage ratio
    num = HEM_STD.interval_mass(0.5e-3, r1) + HEM_STD.interval_mass(-r1, -0.5e-3)
    den = HEM_STD.positive_tail(0.5e-3) + HEM_STD.negative_tail(-0.5e-3)
    assert num / den >= 0.99999
    r2 = choose_truncation_by_mass(HEM_STD, h=1e-3, ratio=0.999999)
    assert r2 >= r1  # ratio closer to 1 pushes R out
    # compact support: never exceeds the pre-truncation radius by more than a cell
    pre = truncate_measure(HEM_STD, 0.25)
    r3 = choose_truncation_by_mass(pre, h=1e-3)
    assert r3 <= 0.25 + 2e-3


def test_params_from_eps():
    h, r, n = params_from_eps(0.1, beta=1.0, d_v=1 / 3, d_b=1 / 3, d_t=1 / 3)
    assert_allclose(h, 0.01, rtol=1e-12)
    assert_allclose(r, 10.0, rtol=1e-12)
    assert n == 100
    # halving eps: n quadruples; h scales by 2^{-2/(2-beta)} (so quarters at beta = 1)
    h2, _, n2 = params_from_eps(0.05, beta=1.0, d_v=1 / 3, d_b=1 / 3, d_t=1 / 3)
    assert_allclose(h2, 0.01 / 4, rtol=1e-12)
    assert n2 == 400
    h3, _, _ = params_from_eps(0.05, beta=0.0, d_v=1 / 3, d_b=1 / 3, d_t=1 / 3)
    assert_allclose(h3, (3 * (1 / 3)) ** -0.5 * 0.05, rtol=1e-12)
    with pytest.raises(ValueError):
        params_from_eps(-1.0, 1.0, 1, 1, 1)
    with pytest.raises(ValueError):
        params_from_eps(0.1, 2.0, 1, 1, 1)


def test_rate_bound_as2():
    # h^2 * total_rate(h) stays bounded as h decreases, for each catalog model
    for model in [HEM_STD, CGMY15, CGMY(c=1.23, g=15.0, m=20.0, y=0.2)]:
        vals = []
        for h in [1e-2, 1e-3, 1e-4]:
            r = min(1.0, choose_truncation_by_mass(model, h))
            t = truncate_measure(model, r)
            vals.append(h**2 * t.mass_outside(h / 2))
        assert vals[0] < np.inf
        assert max(vals) <= max(vals[0], 1e-12) * 4 + 1e-9  # no explosion


def test_c_h_scaling_matches_bg_index():
    h = 1e-3
    measure_t = truncate_measure(CGMY15, 1.0)
    c1 = small_jump_cov(measure_t, GridSpec(h=h, R=1.0))[0, 0]
    c2 = small_jump_cov(measure_t, GridSpec(h=h / 2, R=1.0))[0, 0]
    assert abs(math.log2(c1 / c2) - (2 - CGMY15.y)) <= 0.1
