"""Multilevel Monte-Carlo over the lattice levels h_l = h0 2^{-l}.

The estimator telescopes the level-0 mean with coupled level differences:

    S = mean_0[f(X^{h_0})] + sum_l mean_l[f(X^{h_l}) - f(X~^{h_{l-1}})]

Pilot runs estimate per-level variances and costs; path counts follow the
Lagrange allocation N_l ~ sqrt(V_l / C_l) with half of eps^2 budgeted to the
statistical error (theta_stat) and half to the bias.  Levels are added until
the fitted geometric mean-decay model (rate 1 - beta/2 per level) predicts a
remaining bias below eps/sqrt(2), or the level cap is hit; when the bias
constant is supplied, the cap from the mean-square-error split applies on
top.  Per-level streams are keyed by (seed, tag, level, chunk), so reports
are reproducible for any worker count.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sstats

from .coupling import CouplingSampler, simulate_coupled_batch, verify_rate_identity
from .grid import GridSpec, align_truncation, build_jump_table, choose_truncation_by_mass
from .pathsim import SchemeProcess, chunk_size_for, simulate_batch
from .rng import substream

__all__ = [
    "MLMCConfig",
    "LevelStat",
    "MLMCReport",
    "LevelLadder",
    "PayoffLevelSampler",
    "run_mlmc",
    "level_diagnostics",
    "cost_curve",
    "max_level_bound",
]


@dataclass
class MLMCConfig:
    h0: float
    eps: float
    pilot_paths: int = 10_000
    max_levels: int = 10
    theta_stat: float = 0.5
    mass_ratio: float = 0.99999
    R: float | None = None
    d_b: float | None = None
    d_t: float | None = None
    d_v: float | None = None
    verify_coupling: bool = True
    grid_overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.eps <= 0 or self.h0 <= 0:
            raise ValueError("eps and h0 must be positive")
        if not 0.0 < self.theta_stat < 1.0:
            raise ValueError("theta_stat must be in (0, 1)")


def max_level_bound(eps: float, beta: float, h0: float, d_b: float) -> int:
    """Hard cap on the number of levels from the bias share of the MSE."""
    num = math.log(3.0 * d_b * h0 ** (2.0 - beta)) - 2.0 * math.log(eps)
    return max(0, math.floor(num / ((2.0 - beta) * math.log(2.0))))


class LevelLadder:
    """Per-level tables, processes and level couplers over a common truncation.

    With `driftless_center` the per-level drift is set to -mu~ so the scheme
    has zero center drift (compensated jumps), the representation a driftless
    SDE driver needs.
    """

    def __init__(self, measure, mu, Sigma, T: float, cfg: MLMCConfig, driftless_center: bool = False):
        self.measure = measure
        self.mu = mu
        self.Sigma = Sigma
        self.T = T
        self.cfg = cfg
        self.driftless_center = driftless_center
        self.d = measure.dim if hasattr(measure, "dim") else 1
        r = cfg.R
        if r is None:
            if cfg.d_t is not None:
                r = math.sqrt(3.0 * cfg.d_t) / cfg.eps
            else:
                r = choose_truncation_by_mass(measure, cfg.h0, cfg.mass_ratio)
        self.R = align_truncation(r, cfg.h0)
        self.beta = measure.bg_index()
        self._procs: dict[int, SchemeProcess] = {}
        self._couplers: dict[int, CouplingSampler] = {}

    def h(self, level: int) -> float:
        return self.cfg.h0 * 2.0**-level

    def proc(self, level: int) -> SchemeProcess:
        if level not in self._procs:
            grid = GridSpec(h=self.h(level), R=self.R, d=self.d, **self.cfg.grid_overrides)
            table = build_jump_table(self.measure, grid)
            mu = -table.mu_tilde if self.driftless_center else self.mu
            self._procs[level] = SchemeProcess(mu=mu, Sigma=self.Sigma, table=table, T=self.T)
        return self._procs[level]

    def coupler(self, level: int) -> CouplingSampler:
        if level not in self._couplers:
            fine = self.proc(level).table
            coarse = self.proc(level - 1).table
            c = CouplingSampler(fine, coarse)
            if self.cfg.verify_coupling:
                verify_rate_identity(fine, coarse)
            self._couplers[level] = c
        return self._couplers[level]


@dataclass
class LevelAccum:
    n: int = 0
    sum_diff: float = 0.0
    sumsq_diff: float = 0.0
    sum_fine: float = 0.0
    sumsq_fine: float = 0.0
    cost: float = 0.0
    chunks: int = 0

    def add(self, other: "LevelAccum"):
        self.n += other.n
        self.sum_diff += other.sum_diff
        self.sumsq_diff += other.sumsq_diff
        self.sum_fine += other.sum_fine
        self.sumsq_fine += other.sumsq_fine
        self.cost += other.cost
        self.chunks += other.chunks

    @property
    def mean(self) -> float:
        return self.sum_diff / self.n

    @property
    def var(self) -> float:
        if self.n < 2:
            return 0.0
        m = self.mean
        return max(self.sumsq_diff / self.n - m * m, 0.0) * self.n / (self.n - 1)

    @property
    def mean_fine(self) -> float:
        return self.sum_fine / self.n

    @property
    def var_fine(self) -> float:
        if self.n < 2:
            return 0.0
        m = self.mean_fine
        return max(self.sumsq_fine / self.n - m * m, 0.0) * self.n / (self.n - 1)

    @property
    def cost_per_path(self) -> float:
        return self.cost / max(self.n, 1)


class PayoffLevelSampler:
    """Level sampling for path functionals evaluated through batch views."""

    def __init__(self, ladder: LevelLadder, payoff_factory, workers: int = 1):
        self.ladder = ladder
        self.payoff_factory = payoff_factory
        self.workers = workers
        self._payoffs: dict[int, object] = {}

    def payoff(self, level: int):
        if level not in self._payoffs:
            self._payoffs[level] = self.payoff_factory(self.ladder.proc(level))
        return self._payoffs[level]

    @property
    def beta(self) -> float:
        return self.ladder.beta

    def _one_chunk(self, level: int, size: int, seed: int, tag: int, ci: int, n: int) -> LevelAccum:
        proc = self.ladder.proc(level)
        payoff_f = self.payoff(level)
        obs = tuple(getattr(payoff_f, "obs_dates", ()) or ())
        needs_times = bool(getattr(payoff_f, "needs_times", False))
        rng = substream(seed, tag, level, ci)
        if level == 0:
            batch = simulate_batch(proc, size, rng, obs_dates=obs, needs_times=needs_times)
            vals = np.asarray(payoff_f.evaluate(batch.view("fine")), dtype=float)
            diff = vals
        else:
            coupler = self.ladder.coupler(level)
            proc_c = self.ladder.proc(level - 1)
            payoff_c = self.payoff(level - 1)
            batch = simulate_coupled_batch(
                proc, proc_c, coupler, size, rng, obs_dates=obs, needs_times=needs_times
            )
            vals = np.asarray(payoff_f.evaluate(batch.view("fine")), dtype=float)
            vals_c = np.asarray(payoff_c.evaluate(batch.view("coarse")), dtype=float)
            diff = vals - vals_c
        good = np.isfinite(diff)
        if not np.all(good):
            if (~good).sum() > max(1, 1e-4 * n):
                raise ArithmeticError("too many non-finite payoff values")
            diff, vals = diff[good], vals[good]
        return LevelAccum(
            n=int(diff.size),
            sum_diff=float(diff.sum()),
            sumsq_diff=float((diff * diff).sum()),
            sum_fine=float(vals.sum()),
            sumsq_fine=float((vals * vals).sum()),
            cost=batch.ops,
            chunks=1,
        )

    def sample_level(self, level: int, n: int, seed: int, tag: int, chunk_offset: int) -> LevelAccum:
        proc = self.ladder.proc(level)
        if level > 0:
            self.ladder.coupler(level)  # build (and verify) before any threading
        chunk = chunk_size_for(proc)
        sizes = []
        done = 0
        while done < n:
            sizes.append(min(chunk, n - done))
            done += sizes[-1]
        acc = LevelAccum()
        if self.workers > 1:
            from concurrent.futures import ThreadPoolExecutor

            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                parts = list(
                    pool.map(
                        lambda i: self._one_chunk(level, sizes[i], seed, tag, chunk_offset + i, n),
                        range(len(sizes)),
                    )
                )
        else:
            parts = [
                self._one_chunk(level, sizes[i], seed, tag, chunk_offset + i, n) for i in range(len(sizes))
            ]
        for part in parts:  # merge in chunk order: worker-count independent
            acc.add(part)
        return acc


@dataclass
class LevelStat:
    level: int
    h: float
    n: int
    mean: float
    var: float
    cost_per_path: float
    mean_fine: float
    var_fine: float


@dataclass
class MLMCReport:
    eps: float
    beta: float
    seed: int
    levels: list[LevelStat]
    estimate: float
    bias_est: float
    stat_error: float
    total_cost: float
    mc_proxy_cost: float
    wall_seconds: float

    @property
    def n_levels(self) -> int:
        return len(self.levels) - 1

    def telescoped_estimate(self) -> float:
        return float(sum(ls.mean for ls in self.levels))


def _bias_estimate(means: list[float], beta: float) -> float:
    r = 2.0 ** -(1.0 - beta / 2.0)
    if len(means) < 2:
        return math.inf
    tail = max(abs(means[-1]), r * abs(means[-2]))
    return tail * r / (1.0 - r)


def run_mlmc(sampler, cfg: MLMCConfig, seed: int, tag: int = 0) -> MLMCReport:
    """Run the multilevel estimator to the target RMSE eps."""
    t0 = time.perf_counter()
    beta = sampler.beta
    cap = cfg.max_levels
    if cfg.d_b is not None:
        cap = min(cap, max_level_bound(cfg.eps, beta, cfg.h0, cfg.d_b))
    accums: dict[int, LevelAccum] = {}
    offsets: dict[int, int] = {}

    def extend(level: int, upto: int):
        cur = accums.setdefault(level, LevelAccum())
        if cur.n >= upto:
            return
        extra = sampler.sample_level(level, upto - cur.n, seed, tag, offsets.get(level, 0))
        offsets[level] = offsets.get(level, 0) + extra.chunks
        cur.add(extra)

    level_count = min(2, cap)
    for l in range(level_count + 1):
        extend(l, cfg.pilot_paths)

    while True:
        levels = sorted(accums)
        vs = [accums[l].var for l in levels]
        cs = [max(accums[l].cost_per_path, 1.0) for l in levels]
        if vs[0] == 0.0 and any(v > 0 for v in vs[1:]):
            raise ArithmeticError("level-0 pilot variance is 0 for a non-constant payoff")
        coupled = vs[1:]
        inc = [coupled[i + 1] > coupled[i] for i in range(len(coupled) - 1)]
        if any(inc[i] and inc[i + 1] and inc[i + 2] for i in range(len(inc) - 2)):
            raise ArithmeticError("level variances increasing across 3 consecutive levels; coupling suspect")
        lagrange = sum(math.sqrt(v * c) for v, c in zip(vs, cs))
        for l in levels:
            v, c = accums[l].var, max(accums[l].cost_per_path, 1.0)
            n_l = math.ceil(math.sqrt(v / c) * lagrange / (cfg.theta_stat * cfg.eps**2)) if v > 0 else cfg.pilot_paths
            extend(l, max(cfg.pilot_paths, n_l))
        means = [accums[l].mean for l in levels]
        bias = _bias_estimate(means[1:], beta) if len(means) > 1 else math.inf
        if all(v == 0.0 for v in vs):
            bias = 0.0  # constant payoff: exact at level 0
        if bias <= cfg.eps / math.sqrt(2.0) or len(levels) - 1 >= cap:
            break
        extend(len(levels), cfg.pilot_paths)

    levels = sorted(accums)
    stats = [
        LevelStat(
            level=l,
            h=sampler.ladder.h(l) if hasattr(sampler, "ladder") else cfg.h0 * 2.0**-l,
            n=accums[l].n,
            mean=accums[l].mean,
            var=accums[l].var,
            cost_per_path=accums[l].cost_per_path,
            mean_fine=accums[l].mean_fine,
            var_fine=accums[l].var_fine,
        )
        for l in levels
    ]
    estimate = float(sum(s.mean for s in stats))
    stat_err = math.sqrt(sum(s.var / s.n for s in stats))
    total_cost = sum(accums[l].cost for l in levels)
    mc_proxy = cfg.eps**-2 * stats[0].var_fine * stats[-1].cost_per_path
    bias = _bias_estimate([s.mean for s in stats[1:]], beta) if len(stats) > 1 else 0.0
    if all(s.var == 0.0 for s in stats):
        bias = 0.0
    return MLMCReport(
        eps=cfg.eps,
        beta=beta,
        seed=seed,
        levels=stats,
        estimate=estimate,
        bias_est=bias,
        stat_error=stat_err,
        total_cost=total_cost,
        mc_proxy_cost=mc_proxy,
        wall_seconds=time.perf_counter() - t0,
    )


def level_diagnostics(sampler, L: int, paths: int, seed: int, tag: int = 1):
    """Giles-style per-level table plus regression slopes over levels 1..L.

    Rows: (level, log2_var_Pl, log2_var_diff, log2_mean_Pl, log2_mean_diff,
    cost); slopes carry standard errors, NA with fewer than 2 difference
    levels.
    """
    rows = []
    for l in range(L + 1):
        acc = sampler.sample_level(l, paths, seed, tag, 0)
        rows.append(
            {
                "level": l,
                "log2_var_Pl": math.log2(acc.var_fine) if acc.var_fine > 0 else float("nan"),
                "log2_var_diff": math.log2(acc.var) if acc.var > 0 else float("nan"),
                "log2_mean_Pl": math.log2(abs(acc.mean_fine)) if acc.mean_fine != 0 else float("nan"),
                "log2_mean_diff": math.log2(abs(acc.mean)) if acc.mean != 0 else float("nan"),
                "cost": acc.cost_per_path,
            }
        )
    slopes = {}
    diff_levels = [r for r in rows if r["level"] >= 1]
    if len(diff_levels) >= 2:
        ls = np.array([r["level"] for r in diff_levels], dtype=float)
        for key, name in (("log2_var_diff", "var_slope"), ("log2_mean_diff", "mean_slope")):
            ys = np.array([r[key] for r in diff_levels])
            ok = np.isfinite(ys)
            if ok.sum() >= 2:
                res = sstats.linregress(ls[ok], ys[ok])
                slopes[name] = (float(res.slope), float(res.stderr))
            else:
                slopes[name] = (float("nan"), float("nan"))
    else:
        slopes["var_slope"] = slopes["mean_slope"] = (float("nan"), float("nan"))
    return rows, slopes


def cost_curve(make_sampler, cfg_base: MLMCConfig, eps_list, seed: int):
    """MLMC cost against the plain-MC proxy across target accuracies.

    Rows: (eps, levels, total_cost, mc_proxy_cost, eps2_cost); the reference
    cost exponent 4(beta-1)/(2-beta) applies when beta > 1.
    """
    from dataclasses import replace

    rows = []
    reports = []
    for i, eps in enumerate(eps_list):
        cfg = replace(cfg_base, eps=eps)
        sampler = make_sampler()
        report = run_mlmc(sampler, cfg, seed, tag=100 + i)
        reports.append(report)
        rows.append(
            {
                "eps": eps,
                "levels": report.n_levels,
                "total_cost": report.total_cost,
                "mc_proxy_cost": report.mc_proxy_cost,
                "eps2_cost": eps**2 * report.total_cost,
            }
        )
    beta = reports[0].beta if reports else float("nan")
    ref_exponent = 4.0 * (beta - 1.0) / (2.0 - beta) if beta > 1.0 else 0.0
    return rows, reports, ref_exponent
