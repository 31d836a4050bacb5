"""Simulation of the lattice jump-diffusion scheme and the plain MC estimator.

The approximating process is

    X_t = (mu + mu~) t + sigma W_t + c^h B_t + J_t - mu^{h(lambda)} t

with J the compound Poisson process of lattice jumps.  Uncoupled runs fold
the two Brownian drivers into one Gaussian with covariance Sigma + C^h
(square root phi); coupled runs keep W and B separate because consecutive
levels must share them.

Paths are simulated in vectorized chunks; a chunk's random stream is derived
from the root seed and the chunk index, so estimates are identical for any
worker count.  Costs are counted in abstract operations: jumps drawn,
sampler comparisons, Gaussian variates.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .grid import JumpTable, psd_sqrt
from .rng import substream

__all__ = [
    "sample_poisson",
    "sample_poisson_array",
    "SchemeProcess",
    "PathSkeleton",
    "PathsView",
    "PathBatch",
    "simulate_path",
    "simulate_batch",
    "MCResult",
    "mc_estimate",
    "ExpLevyAsset",
    "diffusion_matrix",
]

PTRS_SWITCH = 10.0


def _poisson_inversion(rate: float, rng: np.random.Generator, size: int) -> np.ndarray:
    kmax = int(rate + 12.0 * math.sqrt(rate + 1.0) + 35.0)
    k = np.arange(kmax + 1)
    logpmf = k * math.log(rate) - rate - gammaln(k + 1.0) if rate > 0 else np.where(k == 0, 0.0, -np.inf)
    cdf = np.cumsum(np.exp(logpmf))
    u = rng.random(size)
    return np.searchsorted(cdf, u, side="left").astype(np.int64)


def _poisson_ptrs(rate: float, rng: np.random.Generator, size: int, ops: list | None) -> np.ndarray:
    # Hormann's PTRS transformed rejection; O(1) expected rounds per draw.
    b = 0.931 + 2.53 * math.sqrt(rate)
    a = -0.059 + 0.02483 * b
    inv_alpha = 1.1239 + 1.1328 / (b - 3.4)
    vr = 0.9277 - 3.6224 / (b - 2.0)
    log_rate = math.log(rate)
    out = np.empty(size, dtype=np.int64)
    todo = np.arange(size)
    rounds = 0
    while todo.size:
        m = todo.size
        rounds += m
        u = rng.random(m) - 0.5
        v = rng.random(m)
        us = 0.5 - np.abs(u)
        k = np.floor((2.0 * a / us + b) * u + rate + 0.43).astype(np.int64)
        accept = (us >= 0.07) & (v <= vr)
        rest = ~accept & (k >= 0) & ~((us < 0.013) & (v > us))
        if np.any(rest):
            kk = k[rest]
            lhs = np.log(v[rest] * inv_alpha / (a / us[rest] ** 2 + b))
            rhs = kk * log_rate - rate - gammaln(kk + 1.0)
            acc2 = np.zeros(m, dtype=bool)
            acc2[np.flatnonzero(rest)[lhs <= rhs]] = True
            accept |= acc2
        out[todo[accept]] = k[accept]
        todo = todo[~accept]
    if ops is not None:
        ops.append(float(rounds))
    return out


def sample_poisson_array(rate: float, rng: np.random.Generator, size: int, ops: list | None = None) -> np.ndarray:
    """Exact Poisson(rate) variates; flat expected work per draw in rate."""
    if rate < 0:
        raise ValueError("rate must be non-negative")
    if rate == 0.0:
        return np.zeros(size, dtype=np.int64)
    if rate < PTRS_SWITCH:
        if ops is not None:
            ops.append(float(size))
        return _poisson_inversion(rate, rng, size)
    return _poisson_ptrs(rate, rng, size, ops)


def sample_poisson(rate: float, rng: np.random.Generator) -> int:
    return int(sample_poisson_array(rate, rng, 1)[0])


def diffusion_matrix(measure) -> np.ndarray:
    """diag(sigma_i^2) from the margins' quoted diffusion volatilities."""
    margins = measure.margins if hasattr(measure, "margins") else [measure]
    return np.diag([m.diffusion_vol**2 for m in margins])


@dataclass
class SchemeProcess:
    """Scheme parameters for one level: triplet drift/covariance plus the table."""

    mu: np.ndarray
    Sigma: np.ndarray
    table: JumpTable
    T: float

    def __post_init__(self):
        d = self.table.d
        self.mu = np.broadcast_to(np.asarray(self.mu, dtype=float), (d,)).copy()
        self.Sigma = np.asarray(self.Sigma, dtype=float).reshape(d, d)
        self.sigma_mat = psd_sqrt(self.Sigma)
        self.phi = psd_sqrt(self.Sigma + self.table.C_h)  # combined-driver square root
        self.drift = self.mu + self.table.mu_tilde - self.table.mu_h_lambda

    @property
    def d(self) -> int:
        return self.table.d

    @property
    def jump_rate(self) -> float:
        return self.table.total_rate

    def log_exp_moment(self) -> np.ndarray:
        """log E[exp(X_1)] per coordinate, summed from the table."""
        cov = self.Sigma + self.table.C_h
        return np.array(
            [
                self.drift[i] + 0.5 * cov[i, i] + self.table.exp_jump_moment(i)
                for i in range(self.d)
            ]
        )


@dataclass
class PathSkeleton:
    """One realized path: jumps, Brownian increments, endpoint identity.

    `counts` paths carry one combined-driver total (phi basis); `times`
    paths carry separate W/B increments over the skeleton grid.
    """

    proc: SchemeProcess
    mode: str
    jump_state_idx: np.ndarray
    jump_values: np.ndarray  # (N, d)
    brownian_total: np.ndarray | None = None  # (d,) combined driver, counts mode
    jump_times: np.ndarray | None = None  # sorted, times mode
    skeleton_times: np.ndarray | None = None  # times mode: 0 < t_1 < ... <= T
    w_increments: np.ndarray | None = None  # (nseg, d) per skeleton segment
    b_increments: np.ndarray | None = None

    @property
    def endpoint_value(self) -> np.ndarray:
        p = self.proc
        jumps = self.jump_values.sum(axis=0) if self.jump_values.size else np.zeros(p.d)
        if self.mode == "counts":
            return p.drift * p.T + p.phi @ self.brownian_total + jumps
        gauss = p.sigma_mat @ self.w_increments.sum(axis=0) + p.table.c_h @ self.b_increments.sum(axis=0)
        return p.drift * p.T + gauss + jumps


def simulate_path(
    proc: SchemeProcess,
    mode: str,
    rng: np.random.Generator,
    obs_times: tuple[float, ...] = (),
) -> PathSkeleton:
    """One path; `counts` draws jump sizes only, `times` adds the time grid."""
    if mode not in ("counts", "times"):
        raise ValueError("mode must be 'counts' or 'times'")
    table = proc.table
    n_jumps = sample_poisson(proc.jump_rate * proc.T, rng)
    if table.sampler is not None and n_jumps:
        idx = table.sampler.draw(rng, n_jumps)
    else:
        idx = np.zeros(0, dtype=np.int64)
    values = table.jump_values(idx) if idx.size else np.zeros((0, table.d))
    if mode == "counts":
        w = rng.standard_normal(table.d) * math.sqrt(proc.T)
        return PathSkeleton(proc, mode, idx, values, brownian_total=w)
    times = np.sort(rng.random(n_jumps) * proc.T)
    skel = np.unique(np.concatenate([times, np.asarray(obs_times, dtype=float), [proc.T]]))
    skel = skel[(skel > 0) & (skel <= proc.T)]
    dts = np.diff(np.concatenate([[0.0], skel]))
    w_inc = rng.standard_normal((skel.size, table.d)) * np.sqrt(dts)[:, None]
    b_inc = rng.standard_normal((skel.size, table.d)) * np.sqrt(dts)[:, None]
    return PathSkeleton(
        proc,
        mode,
        idx,
        values,
        jump_times=times,
        skeleton_times=skel,
        w_increments=w_inc,
        b_increments=b_inc,
    )


@dataclass
class PathsView:
    """Uniform read surface for payoffs over one level of a batch."""

    proc: SchemeProcess
    n: int
    counts: np.ndarray
    offsets: np.ndarray
    jump_values: np.ndarray  # (M, d)
    jump_times: np.ndarray | None
    obs_dates: np.ndarray  # (k,), last entry = T
    gauss_obs: np.ndarray  # (n, k, d) cumulated Brownian part (already matrix-mapped)

    def path_ids(self) -> np.ndarray:
        return np.repeat(np.arange(self.n), self.counts)

    def jump_sums(self) -> np.ndarray:
        out = np.zeros((self.n, self.proc.d))
        if self.jump_values.shape[0]:
            ids = self.path_ids()
            for j in range(self.proc.d):
                out[:, j] = np.bincount(ids, weights=self.jump_values[:, j], minlength=self.n)
        return out

    def endpoints(self) -> np.ndarray:
        return self.proc.drift * self.proc.T + self.gauss_obs[:, -1, :] + self.jump_sums()

    def values_at_obs(self) -> np.ndarray:
        """(n, k, d) process values at the observation dates."""
        k = self.obs_dates.size
        out = self.proc.drift[None, None, :] * self.obs_dates[None, :, None] + self.gauss_obs
        if self.jump_values.shape[0]:
            if self.jump_times is None:
                raise ValueError("observation dates before T require times mode")
            ids = self.path_ids()
            for ki in range(k):
                sel = self.jump_times <= self.obs_dates[ki]
                if not np.any(sel):
                    continue
                for j in range(self.proc.d):
                    out[:, ki, j] += np.bincount(
                        ids[sel], weights=self.jump_values[sel, j], minlength=self.n
                    )
        return out


@dataclass
class PathBatch:
    """A chunk of simulated paths; coupled batches carry both levels."""

    proc: SchemeProcess
    n: int
    counts: np.ndarray
    jump_idx: np.ndarray
    jump_times: np.ndarray | None
    obs_dates: np.ndarray
    w_obs: np.ndarray  # (n, k, d) raw Brownian W at obs dates
    b_obs: np.ndarray | None  # None when the combined driver was used
    ops: float
    proc_coarse: SchemeProcess | None = None
    jump_coarse: np.ndarray | None = None  # (M, d) coarse jump vectors (zeros = pruned)

    def __post_init__(self):
        self.offsets = np.concatenate([[0], np.cumsum(self.counts)])

    def view(self, level: str = "fine") -> PathsView:
        if level == "fine":
            proc = self.proc
            jumps = proc.table.jump_values(self.jump_idx) if self.jump_idx.size else np.zeros((0, proc.d))
            if self.b_obs is None:
                gauss = np.einsum("ij,nkj->nki", proc.phi, self.w_obs)
            else:
                gauss = np.einsum("ij,nkj->nki", proc.sigma_mat, self.w_obs) + np.einsum(
                    "ij,nkj->nki", proc.table.c_h, self.b_obs
                )
        elif level == "coarse":
            if self.proc_coarse is None:
                raise ValueError("not a coupled batch")
            proc = self.proc_coarse
            jumps = self.jump_coarse
            gauss = np.einsum("ij,nkj->nki", proc.sigma_mat, self.w_obs) + np.einsum(
                "ij,nkj->nki", proc.table.c_h, self.b_obs
            )
        else:
            raise ValueError("level must be 'fine' or 'coarse'")
        return PathsView(
            proc=proc,
            n=self.n,
            counts=self.counts,
            offsets=self.offsets,
            jump_values=jumps,
            jump_times=self.jump_times,
            obs_dates=self.obs_dates,
            gauss_obs=gauss,
        )


def simulate_batch(
    proc: SchemeProcess,
    n: int,
    rng: np.random.Generator,
    obs_dates: tuple[float, ...] = (),
    needs_times: bool = False,
    split_brownian: bool = False,
) -> PathBatch:
    """Vectorized batch of `n` independent paths of one level."""
    table = proc.table
    d = table.d
    ops: list[float] = []
    counts = sample_poisson_array(proc.jump_rate * proc.T, rng, n, ops)
    m = int(counts.sum())
    jump_idx = table.sampler.draw(rng, m) if m else np.zeros(0, dtype=np.int64)
    dates = np.unique(np.concatenate([np.asarray(obs_dates, dtype=float), [proc.T]]))
    if np.any(dates <= 0) or np.any(dates > proc.T):
        raise ValueError("observation dates must lie in (0, T]")
    jump_times = None
    if needs_times or dates.size > 1:
        jump_times = rng.random(m) * proc.T
    dts = np.diff(np.concatenate([[0.0], dates]))
    k = dates.size
    w_obs = np.cumsum(rng.standard_normal((n, k, d)) * np.sqrt(dts)[None, :, None], axis=1)
    gaussians = n * k * d
    b_obs = None
    if split_brownian:
        b_obs = np.cumsum(rng.standard_normal((n, k, d)) * np.sqrt(dts)[None, :, None], axis=1)
        gaussians *= 2
    draw_ops = table.sampler.ops_per_draw if table.sampler is not None else 0.0
    total_ops = float(m) + float(m) * draw_ops + float(gaussians) + sum(ops)
    return PathBatch(
        proc=proc,
        n=n,
        counts=counts,
        jump_idx=jump_idx,
        jump_times=jump_times,
        obs_dates=dates,
        w_obs=w_obs,
        b_obs=b_obs,
        ops=total_ops,
    )


def chunk_size_for(proc: SchemeProcess, target_jumps: float = 3e6) -> int:
    """Deterministic chunking policy: a pure function of the level's rate."""
    mean_jumps = max(proc.jump_rate * proc.T, 1.0)
    return int(max(64, min(16384, target_jumps / mean_jumps)))


@dataclass
class MCResult:
    estimate: float
    stderr: float
    cost_ops: float
    n: int
    flagged: int
    wall_seconds: float
    variance: float = field(default=0.0)


def _merge_moments(parts):
    # parts: list of (count, sum, sumsq) in fixed chunk order
    total_n = sum(p[0] for p in parts)
    total_sum = math.fsum(p[1] for p in parts)
    total_sq = math.fsum(p[2] for p in parts)
    return total_n, total_sum, total_sq


def mc_estimate(
    payoff,
    proc: SchemeProcess,
    n: int,
    seed: int,
    stream_tag: int = 0,
    workers: int = 1,
) -> MCResult:
    """Plain Monte-Carlo mean of `payoff` over n paths of the scheme.

    Paths are simulated in fixed chunks with per-chunk derived streams, so the
    result depends only on (seed, stream_tag, n), never on `workers`.
    """
    if n < 2:
        raise ValueError("need at least 2 paths")
    t0 = time.perf_counter()
    chunk = chunk_size_for(proc)
    starts = list(range(0, n, chunk))
    obs = tuple(getattr(payoff, "obs_dates", ()) or ())
    needs_times = bool(getattr(payoff, "needs_times", False))

    def run_chunk(ci: int):
        lo = starts[ci]
        size = min(chunk, n - lo)
        rng = substream(seed, stream_tag, ci)
        batch = simulate_batch(proc, size, rng, obs_dates=obs, needs_times=needs_times)
        vals = np.asarray(payoff.evaluate(batch.view("fine")), dtype=float)
        good = np.isfinite(vals)
        flagged = int(np.size(vals) - good.sum())
        v = vals[good]
        return (v.size, float(v.sum()), float((v * v).sum()), flagged, batch.ops)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run_chunk, range(len(starts))))
    else:
        parts = [run_chunk(ci) for ci in range(len(starts))]

    flagged = sum(p[3] for p in parts)
    cost = math.fsum(p[4] for p in parts)
    cnt, s, sq = _merge_moments([p[:3] for p in parts])
    if flagged:
        if flagged > max(1, 1e-4 * n):
            raise ArithmeticError(f"{flagged} non-finite payoff values out of {n}")
    mean = s / cnt
    var = max(sq / cnt - mean * mean, 0.0) * cnt / (cnt - 1)
    return MCResult(
        estimate=mean,
        stderr=math.sqrt(var / cnt),
        cost_ops=cost,
        n=cnt,
        flagged=flagged,
        wall_seconds=time.perf_counter() - t0,
        variance=var,
    )


class ExpLevyAsset:
    """Exponential-Levy asset mapping with the discrete martingale correction.

    S^i_t = S0^i exp((r - q_i + omega_i) t + X^i_t) where omega is
    -log E[exp(X^i_1)] summed from the jump table, so the discounted asset is
    a martingale of the simulated scheme itself.
    """

    def __init__(self, s0, r: float, proc: SchemeProcess, q=0.0):
        d = proc.d
        self.s0 = np.broadcast_to(np.asarray(s0, dtype=float), (d,)).copy()
        self.q = np.broadcast_to(np.asarray(q, dtype=float), (d,)).copy()
        self.r = float(r)
        self._omega_cache: dict[int, np.ndarray] = {}

    def omega(self, proc: SchemeProcess) -> np.ndarray:
        key = id(proc)
        if key not in self._omega_cache:
            self._omega_cache[key] = -proc.log_exp_moment()
        return self._omega_cache[key]

    def prices_at_obs(self, view: PathsView) -> np.ndarray:
        """(n, k, d) asset prices at the view's observation dates."""
        x = view.values_at_obs()
        om = self.omega(view.proc)
        grow = (self.r - self.q + om)[None, None, :] * view.obs_dates[None, :, None]
        return self.s0[None, None, :] * np.exp(grow + x)

    def terminal_prices(self, view: PathsView) -> np.ndarray:
        x = view.endpoints()
        om = self.omega(view.proc)
        grow = (self.r - self.q + om) * view.proc.T
        return self.s0[None, :] * np.exp(grow[None, :] + x)
