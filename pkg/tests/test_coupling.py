import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import stats

from levyctmc.copula import ClaytonCopula, CopulaMeasure
from levyctmc.coupling import (
    PRUNED,
    CouplingSampler,
    mark_distribution,
    sample_coupled_jump,
    simulate_coupled_batch,
    simulate_coupled_paths,
    verify_rate_identity,
)
from levyctmc.grid import GridSpec, build_jump_table
from levyctmc.models import CGMY, HEM, LevyModel1D
from levyctmc.pathsim import SchemeProcess
from levyctmc.rng import substream

HEM_STD = HEM(lam=3.0, p=0.6, eta1=20.0, eta2=25.0, sigma=0.05)
CGMY15 = CGMY(c=0.007, g=2.0, m=4.0, y=1.5)


class UniformBand(LevyModel1D):
    """Test helper: constant density `c` on [-1, 1] \\ {0}."""

    def __init__(self, c=1.0):
        self.c = c

    def bg_index(self):
        return 0.0

    def density(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(np.abs(x) <= 1.0, self.c, 0.0)

    def positive_tail(self, x):
        x = np.asarray(x, dtype=float)
        out = self.c * np.clip(1.0 - x, 0.0, 1.0)
        return out if out.ndim else float(out)

    def negative_tail(self, x):
        x = np.asarray(x, dtype=float)
        out = self.c * np.clip(1.0 + x, 0.0, 1.0)
        return out if out.ndim else float(out)

    def second_moment(self, a):
        a = min(a, 1.0)
        return 2 * self.c * a**3 / 3

    def first_moment(self, a, b):
        a2, b2 = np.clip([a, b], -1.0, 1.0)
        return self.c * (b2**2 - a2**2) / 2


def level_pair(model, h, R, **kw):
    fine = build_jump_table(model, GridSpec(h=h, R=R, **kw))
    coarse = build_jump_table(model, GridSpec(h=2 * h, R=R, **kw))
    return fine, coarse


def test_mark_point_mass_on_even_states():
    fine, _ = level_pair(HEM_STD, 0.02, 1.0)
    dist = mark_distribution(fine, (2,))
    assert dist.support_size() == 1
    assert np.all(dist.marks == 0)
    assert dist.probs[0] == 1.0


def test_mark_half_half_for_constant_density():
    fine, _ = level_pair(UniformBand(), 0.1, 1.0)
    dist = mark_distribution(fine, (3,))
    assert dist.support_size() == 2
    assert_allclose(np.sort(dist.probs), [0.5, 0.5], atol=1e-12)


def test_mark_decaying_density_prefers_inner_half():
    fine, _ = level_pair(HEM_STD, 0.02, 1.0)
    dist = mark_distribution(fine, (3,))  # s = 0.06
    p_plus = dist.probs[np.flatnonzero(dist.marks[:, 0] == 1)[0]]
    expected = HEM_STD.interval_mass(0.06, 0.07) / HEM_STD.interval_mass(0.05, 0.07)
    assert_allclose(p_plus, expected, rtol=1e-10)
    assert p_plus < 0.5
    assert_allclose(dist.probs.sum(), 1.0, rtol=0)  # exact normalization


def test_sample_coupled_jump_rules():
    fine, coarse = level_pair(HEM_STD, 0.02, 1.0)
    rng = substream(0, 0)
    dist_even = mark_distribution(fine, (2,))
    for _ in range(5):
        out = sample_coupled_jump(dist_even, (2,), rng)
        assert np.all(out["coarse"] == (2,))
    # state h with mark -h prunes the coarse jump
    dist_h = mark_distribution(fine, (1,))
    seen_prune = False
    for _ in range(200):
        out = sample_coupled_jump(dist_h, (1,), rng)
        if out["coarse"] is PRUNED:
            seen_prune = True
        else:
            assert np.all(np.abs(out["coarse"] - np.array([1])) <= 1)
    assert seen_prune


def test_displacement_bound_vectorized():
    fine, coarse = level_pair(HEM_STD, 0.05, 1.0)
    sampler = CouplingSampler(fine, coarse)
    rng = substream(1, 0)
    idx = fine.sampler.draw(rng, 100_000)
    marks = sampler.marks_for(idx, rng)
    assert np.max(np.abs(marks)) <= 1


def test_rate_identity_1d_hem():
    fine, coarse = level_pair(HEM_STD, 0.05, 1.0)
    report = verify_rate_identity(fine, coarse)
    assert report.max_rel_error <= 1e-10
    assert_allclose(report.induced_total, report.total_rate_coarse, rtol=1e-10)


def test_rate_identity_2d_clayton():
    m = CopulaMeasure(ClaytonCopula(0.7, 0.3, d=2), [HEM_STD, HEM(lam=5.0, p=0.6, eta1=20.0, eta2=25.0)])
    fine = build_jump_table(m, GridSpec(h=0.25, R=1.0, d=2))
    coarse = build_jump_table(m, GridSpec(h=0.5, R=1.0, d=2))
    report = verify_rate_identity(fine, coarse)
    assert report.max_rel_error <= 1e-10


def test_lattice_supported_measure_couples_identically():
    # all mass in the cell of state 2h -> marks are all zero
    class EvenBump(UniformBand):
        def density(self, x):
            x = np.asarray(x, dtype=float)
            return np.where((x > 0.15) & (x <= 0.25), 10.0, 0.0)

        def positive_tail(self, x):
            x = np.asarray(x, dtype=float)
            out = 10.0 * np.clip(0.25 - np.maximum(x, 0.15), 0.0, 0.1)
            return out if out.ndim else float(out)

        def negative_tail(self, x):
            x = np.asarray(x, dtype=float)
            out = np.zeros(x.shape)
            return out if out.ndim else float(out)

        def second_moment(self, a):
            return 0.0 if a <= 0.15 else 10.0 * ((min(a, 0.25)) ** 3 - 0.15**3) / 3

        def first_moment(self, a, b):
            lo, hi = max(a, 0.15), min(b, 0.25)
            return 0.0 if hi <= lo else 10.0 * (hi**2 - lo**2) / 2

    model = EvenBump()
    fine = build_jump_table(model, GridSpec(h=0.1, R=1.0))
    coarse = build_jump_table(model, GridSpec(h=0.2, R=1.0))
    proc_h = SchemeProcess(np.zeros(1), np.zeros((1, 1)), fine, T=2.0)
    proc_2h = SchemeProcess(np.zeros(1), np.zeros((1, 1)), coarse, T=2.0)
    sampler = CouplingSampler(fine, coarse)
    pair = simulate_coupled_paths(proc_h, proc_2h, sampler, "counts", substream(3, 0))
    assert np.array_equal(pair.fine.jump_values, pair.coarse.jump_values)


def test_endpoint_difference_identity():
    fine, coarse = level_pair(CGMY15, 0.02, 1.0)
    proc_h = SchemeProcess(np.zeros(1), np.zeros((1, 1)), fine, T=1.0)
    proc_2h = SchemeProcess(np.zeros(1), np.zeros((1, 1)), coarse, T=1.0)
    sampler = CouplingSampler(fine, coarse)
    pair = simulate_coupled_paths(proc_h, proc_2h, sampler, "counts", substream(5, 1))
    marks_sum = (pair.marks * fine.grid.h).sum(axis=0)
    b_total = pair.fine.b_increments.sum(axis=0)
    expect = (
        -marks_sum
        + (fine.c_h - coarse.c_h) @ b_total
        + (coarse.mu_h_lambda - fine.mu_h_lambda) * proc_h.T
    )
    assert_allclose(pair.endpoint_difference, expect, rtol=1e-12, atol=1e-15)


def test_coarse_marginal_law_chi_square():
    fine, coarse = level_pair(HEM_STD, 0.05, 0.8)
    assert coarse.states.shape[0] <= 200
    proc_h = SchemeProcess(np.zeros(1), np.zeros((1, 1)), fine, T=1.0)
    sampler = CouplingSampler(fine, coarse)
    rng = substream(7, 0)
    n_draws = 200_000
    idx = fine.sampler.draw(rng, n_draws)
    marks = sampler.marks_for(idx, rng)
    coarse_vals = fine.states[idx][:, 0] + marks[:, 0]  # h units
    emitted = coarse_vals != 0
    # frequencies of emitted coarse jumps against the direct 2h table
    states_2h = coarse.states[:, 0]
    expected_p = coarse.masses / fine.total_rate  # per fine jump, P(land at z)
    got = np.array([(coarse_vals == 2 * z).sum() for z in states_2h])
    keep = n_draws * expected_p > 10
    stat = float(np.sum((got[keep] - n_draws * expected_p[keep]) ** 2 / (n_draws * expected_p[keep])))
    pval = stats.chi2.sf(stat, df=int(keep.sum()) - 1)
    assert pval > 0.01
    # pruned fraction matches the exact rate deficit
    expected_prune = (fine.total_rate - coarse.total_rate) / fine.total_rate
    got_prune = float((~emitted).mean())
    se = math.sqrt(expected_prune * (1 - expected_prune) / n_draws)
    assert abs(got_prune - expected_prune) < 4 * se + 1e-12


def test_coupled_batch_views():
    fine, coarse = level_pair(CGMY15, 0.02, 1.0)
    proc_h = SchemeProcess(np.zeros(1), np.zeros((1, 1)), fine, T=1.0)
    proc_2h = SchemeProcess(np.zeros(1), np.zeros((1, 1)), coarse, T=1.0)
    sampler = CouplingSampler(fine, coarse)
    batch = simulate_coupled_batch(proc_h, proc_2h, sampler, 500, substream(11, 0))
    vf = batch.view("fine")
    vc = batch.view("coarse")
    diff = vf.endpoints() - vc.endpoints()
    assert diff.shape == (500, 1)
    # displacement per jump bounded by h, so endpoint gap is at most
    # N_max * h plus the Brownian and compensator parts: crude sanity only
    assert np.all(np.isfinite(diff))
    # coarse jump values live on the 2h lattice
    on_lattice = np.abs(np.round(batch.jump_coarse / (2 * fine.grid.h)) * 2 * fine.grid.h - batch.jump_coarse)
    assert np.max(on_lattice) < 1e-12


def test_misaligned_tables_rejected():
    fine, _ = level_pair(HEM_STD, 0.05, 1.0)
    bad = build_jump_table(HEM_STD, GridSpec(h=0.15, R=1.0))
    with pytest.raises(ValueError):
        CouplingSampler(fine, bad)


def empirical_as2_constant(model, hs, r):
    """max over h of max(h^2 rate(h), second moment over [-h, h]) / h^{2-beta}."""
    from levyctmc.grid import truncate_measure

    beta = model.bg_index()
    vals = []
    for h in hs:
        t = truncate_measure(model, r)
        vals.append(max(h * h * t.mass_outside(h / 2), t.second_moment(h)) / h ** (2 - beta))
    return max(vals)


def test_level_variance_bound():
    # estimated V_l <= 80 d T aleph h^{2-beta} (1 + 50% slack), for the
    # endpoint coordinate and an ATM put on the unit-scale asset
    from levyctmc.pathsim import ExpLevyAsset
    from levyctmc.payoffs import EndpointCoordinate, Put

    from levyctmc.grid import align_truncation

    T = 1.0
    beta = CGMY15.bg_index()
    aleph = empirical_as2_constant(CGMY15, [0.04, 0.02, 0.01], 1.0)
    for h in [0.04, 0.02]:
        r_trunc = align_truncation(1.0, 2 * h)
        fine = build_jump_table(CGMY15, GridSpec(h=h, R=r_trunc))
        coarse = build_jump_table(CGMY15, GridSpec(h=2 * h, R=r_trunc))
        proc_h = SchemeProcess(np.zeros(1), np.zeros((1, 1)), fine, T=T)
        proc_2h = SchemeProcess(np.zeros(1), np.zeros((1, 1)), coarse, T=T)
        sampler = CouplingSampler(fine, coarse)
        batch = simulate_coupled_batch(proc_h, proc_2h, sampler, 4000, substream(23, int(1 / h)))
        bound = 80.0 * 1 * T * aleph * h ** (2 - beta) * 1.5
        endpoint = EndpointCoordinate(0)
        diff_e = endpoint.evaluate(batch.view("fine")) - endpoint.evaluate(batch.view("coarse"))
        assert float(np.var(diff_e)) <= bound
        asset = ExpLevyAsset(s0=1.0, r=0.0, proc=proc_h)
        put_f = Put(strike=1.0, asset=asset)
        asset_c = ExpLevyAsset(s0=1.0, r=0.0, proc=proc_2h)
        put_c = Put(strike=1.0, asset=asset_c)
        diff_p = put_f.evaluate(batch.view("fine")) - put_c.evaluate(batch.view("coarse"))
        assert float(np.var(diff_p)) <= bound
