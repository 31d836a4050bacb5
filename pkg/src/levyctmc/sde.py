"""Jump-adapted Euler scheme for SDEs driven by the lattice scheme, plus the
Levy-driven forward-market model (FMM) with its first-order no-arbitrage
drift.

Breakpoints are the driver's jump times merged with a deterministic global
grid of step eps_t (default h^beta, so the expected number of jumps between
deterministic points stays bounded); anchoring the deterministic points
globally lets a coupled level pair share them.  Between breakpoints

    Z_{j+1} = Z_j + a(Z_j) (X_{t_{j+1}} - X_{t_j}).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .coupling import CoupledPathPair, simulate_coupled_paths
from .mlmc import LevelAccum, LevelLadder
from .pathsim import PathSkeleton, SchemeProcess, simulate_path
from .rng import substream

__all__ = [
    "SDESpec",
    "det_time_grid",
    "relative_time_grid",
    "driver_increments",
    "euler_path",
    "coupled_euler",
    "simulate_sde_path",
    "SDELevelSampler",
    "FMMSpec",
    "fmm_drift",
    "fmm_drift_bruteforce",
    "swaption_payoff",
    "simulate_fmm_paths",
    "FMMLevelSampler",
]


@dataclass
class SDESpec:
    """dZ = a(Z_-) dX with a declared Lipschitz bound on the coefficient."""

    a: callable  # (m,) -> (m, d)
    z0: np.ndarray
    K: float
    m: int = 1
    d: int = 1

    def __post_init__(self):
        self.z0 = np.broadcast_to(np.asarray(self.z0, dtype=float), (self.m,)).copy()
        a0 = np.asarray(self.a(self.z0), dtype=float)
        if a0.shape != (self.m, self.d):
            raise ValueError(f"coefficient must map (m,) to (m, d); got {a0.shape}")
        if np.linalg.norm(a0) > self.K + 1e-12:
            raise ValueError("declared Lipschitz bound violated at z0")

    def spot_check_lipschitz(self, rng: np.random.Generator, trials: int = 64, scale: float = 1.0):
        for _ in range(trials):
            z1 = self.z0 + rng.normal(scale=scale, size=self.m)
            z2 = self.z0 + rng.normal(scale=scale, size=self.m)
            lhs = np.linalg.norm(np.asarray(self.a(z1)) - np.asarray(self.a(z2)))
            if lhs > self.K * np.linalg.norm(z1 - z2) + 1e-9:
                raise ValueError("declared Lipschitz bound violated on sampled pair")


def det_time_grid(T: float, eps_t: float) -> np.ndarray:
    """Anchored deterministic breakpoints: multiples of eps_t in (0, T], plus T."""
    if eps_t <= 0:
        raise ValueError("eps_t must be positive")
    n = int(math.floor(T / eps_t + 1e-12))
    grid = eps_t * np.arange(1, n + 1)
    return np.unique(np.concatenate([grid[grid < T], [T]]))


def relative_time_grid(jump_times: np.ndarray, T: float, eps_t: float) -> np.ndarray:
    """Jump-relative breakpoints: from each breakpoint, the next is the
    earlier of the next jump and the eps_t cap.  Single-level use only (the
    grid depends on the jumps, so coupled levels could not share it)."""
    if eps_t <= 0:
        raise ValueError("eps_t must be positive")
    times = np.sort(np.asarray(jump_times, dtype=float))
    out = []
    t = 0.0
    j = 0
    while t < T - 1e-15:
        nxt = t + eps_t
        while j < times.size and times[j] <= t + 1e-15:
            j += 1
        if j < times.size and times[j] < nxt:
            nxt = times[j]
        out.append(min(nxt, T))
        t = out[-1]
    return np.asarray(out)


def driver_increments(path: PathSkeleton) -> tuple[np.ndarray, np.ndarray]:
    """(breakpoints, per-segment driver increments) from a times-mode skeleton."""
    if path.skeleton_times is None:
        raise ValueError("driver must be simulated in times mode")
    proc = path.proc
    times = path.skeleton_times
    dts = np.diff(np.concatenate([[0.0], times]))
    gauss = path.w_increments @ proc.sigma_mat.T + path.b_increments @ proc.table.c_h.T
    dx = proc.drift[None, :] * dts[:, None] + gauss
    if path.jump_times is not None and path.jump_times.size:
        slots = np.searchsorted(times, path.jump_times)
        np.add.at(dx, slots, path.jump_values)
    return times, dx


def euler_path(sde: SDESpec, path: PathSkeleton, eps_t: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Euler recursion along the driver's skeleton; returns (times, Z values).

    The skeleton must already contain the deterministic grid (pass it as
    obs_times when simulating the driver); eps_t here only validates the cap.
    """
    times, dx = driver_increments(path)
    if eps_t is not None:
        gaps = np.diff(np.concatenate([[0.0], times]))
        if gaps.max() > eps_t + 1e-12:
            raise ValueError("skeleton violates the eps_t cap; simulate with the det grid")
    z = np.empty((times.size + 1, sde.m))
    z[0] = sde.z0
    if sde.m == 1 and sde.d == 1:
        zv = float(sde.z0[0])
        a = sde.a
        for j in range(times.size):
            zv = zv + float(a(np.array([zv]))[0, 0]) * dx[j, 0]
            z[j + 1, 0] = zv
    else:
        zv = sde.z0.copy()
        for j in range(times.size):
            zv = zv + np.asarray(sde.a(zv)) @ dx[j]
            z[j + 1] = zv
    return times, z


def coupled_euler(
    sde: SDESpec, pair: CoupledPathPair, eps_t: float | None = None
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Euler on both levels of a coupled pair over the shared skeleton."""
    times_f, zf = euler_path(sde, pair.fine, eps_t)
    times_c, zc = euler_path(sde, pair.coarse, eps_t)
    if times_f.size != times_c.size:
        raise AssertionError("coupled skeletons must coincide")
    return times_f, zf, zc


def simulate_sde_path(
    sde: SDESpec,
    proc: SchemeProcess,
    rng: np.random.Generator,
    eps_t: float | None = None,
    relative_grid: bool = False,
) -> tuple[np.ndarray, np.ndarray]:
    """Simulate the driver (times mode, eps_t grid included) and run Euler.

    `relative_grid` switches to the jump-relative breakpoint recursion
    (each step capped at eps_t after the previous breakpoint); the default
    anchored grid is what coupled level pairs share.
    """
    beta = proc.table.measure_t.bg_index() if hasattr(proc.table.measure_t, "bg_index") else 0.0
    if eps_t is None:
        eps_t = proc.table.h ** beta if beta > 0 else proc.table.h
    if not relative_grid:
        grid = det_time_grid(proc.T, eps_t)
        path = simulate_path(proc, "times", rng, obs_times=tuple(grid))
        return euler_path(sde, path, eps_t)
    # jump-relative recursion: jumps first, then the grid, then the Brownians
    table = proc.table
    from .pathsim import PathSkeleton, sample_poisson

    n_jumps = sample_poisson(proc.jump_rate * proc.T, rng)
    idx = table.sampler.draw(rng, n_jumps) if (table.sampler is not None and n_jumps) else np.zeros(0, dtype=np.int64)
    times = np.sort(rng.random(n_jumps) * proc.T)
    skel = relative_time_grid(times, proc.T, eps_t)
    dts = np.diff(np.concatenate([[0.0], skel]))
    w_inc = rng.standard_normal((skel.size, table.d)) * np.sqrt(dts)[:, None]
    b_inc = rng.standard_normal((skel.size, table.d)) * np.sqrt(dts)[:, None]
    path = PathSkeleton(
        proc,
        "times",
        idx,
        table.jump_values(idx) if idx.size else np.zeros((0, table.d)),
        jump_times=times,
        skeleton_times=skel,
        w_increments=w_inc,
        b_increments=b_inc,
    )
    return euler_path(sde, path, eps_t)


class SDELevelSampler:
    """MLMC level sampling for functionals of the Euler path.

    `functional` maps (times, Z) to a float; both coupled levels run on the
    union of the fine jump times and the fine level's deterministic grid.
    """

    def __init__(self, ladder: LevelLadder, sde: SDESpec, functional, eps_t_fn=None, chunk: int = 256):
        self.ladder = ladder
        self.sde = sde
        self.functional = functional
        self.eps_t_fn = eps_t_fn or (lambda h, beta: h**beta if beta > 0 else h)
        self.chunk = chunk

    @property
    def beta(self) -> float:
        return self.ladder.beta

    def sample_level(self, level: int, n: int, seed: int, tag: int, chunk_offset: int) -> LevelAccum:
        proc = self.ladder.proc(level)
        eps_t = self.eps_t_fn(proc.table.h, self.beta)
        grid = tuple(det_time_grid(proc.T, eps_t))
        acc = LevelAccum()
        done = 0
        ci = chunk_offset
        while done < n:
            size = min(self.chunk, n - done)
            rng = substream(seed, tag, level, ci)
            fsum = fsq = dsum = dsq = 0.0
            cost = 0.0
            for _ in range(size):
                if level == 0:
                    path = simulate_path(proc, "times", rng, obs_times=grid)
                    _, z = euler_path(self.sde, path)
                    vf = self.functional(_, z)
                    diff = vf
                    cost += path.jump_values.shape[0] + len(grid)
                else:
                    coupler = self.ladder.coupler(level)
                    proc_c = self.ladder.proc(level - 1)
                    pair = simulate_coupled_paths(proc, proc_c, coupler, "times", rng, obs_times=grid)
                    times, zf, zc = coupled_euler(self.sde, pair)
                    vf = self.functional(times, zf)
                    diff = vf - self.functional(times, zc)
                    cost += 2 * (pair.fine.jump_values.shape[0] + len(grid))
                fsum += vf
                fsq += vf * vf
                dsum += diff
                dsq += diff * diff
            acc.add(LevelAccum(n=size, sum_diff=dsum, sumsq_diff=dsq, sum_fine=fsum, sumsq_fine=fsq, cost=cost, chunks=1))
            done += size
            ci += 1
        return acc


# -- forward market model ----------------------------------------------------


@dataclass
class FMMSpec:
    """Term structure of n forward rates over [tenors[i-1], tenors[i]).

    g_i ramps from 1 at tenors[i-1] linearly to 0 at tenors[i]; the vol row
    of rate i is sigma[i] * g_i(t).  The swaption has expiry tenors[0] and
    pays on the rates fixed there.
    """

    tenors: np.ndarray  # (n+1,) increasing, tenors[0] = expiry
    delta: float
    r0: np.ndarray  # (n,)
    sigma: np.ndarray  # (n, d)
    strike: float

    def __post_init__(self):
        self.tenors = np.asarray(self.tenors, dtype=float)
        self.r0 = np.asarray(self.r0, dtype=float)
        self.sigma = np.asarray(self.sigma, dtype=float)
        self.n = self.r0.size
        if self.tenors.size != self.n + 1 or self.sigma.shape[0] != self.n:
            raise ValueError("need n rates, n vol rows and n+1 tenor points")
        if np.any(np.diff(self.tenors) <= 0):
            raise ValueError("tenor grid must be increasing")

    @property
    def expiry(self) -> float:
        return float(self.tenors[0])

    def g(self, t: float) -> np.ndarray:
        starts = self.tenors[:-1]
        ends = self.tenors[1:]
        ramp = (ends - t) / (ends - starts)
        return np.clip(ramp, 0.0, 1.0) * (t > starts) + (t <= starts)

    def gamma(self, t: float) -> np.ndarray:
        return self.sigma * self.g(t)[:, None]

    def discount_prefactor(self) -> float:
        """P(0, expiry) / prod(1 + delta R^i_0) under the flat initial curve."""
        p0 = (1.0 + self.delta * float(self.r0[0])) ** -(self.expiry / self.delta)
        return p0 / float(np.prod(1.0 + self.delta * self.r0))


def fmm_drift(rates: np.ndarray, gammas: np.ndarray, m2: np.ndarray, delta: float) -> np.ndarray:
    """First-order no-arbitrage drift per rate (relative, 1/year).

    drift_i = - sum_{j > i} [delta R^j / (1 + delta R^j)] gamma_i' M2 gamma_j
    with M2 the lattice second-moment matrix sum_s s s' mass(s).
    """
    w = delta * rates / (1.0 + delta * rates)
    inner = (gammas @ m2) @ gammas.T  # inner[i, j] = gamma_i' M2 gamma_j
    n = rates.size
    out = np.zeros(n)
    for i in range(n - 1):
        out[i] = -float(np.sum(w[i + 1 :] * inner[i, i + 1 :]))
    return out


def fmm_drift_bruteforce(rates: np.ndarray, gammas: np.ndarray, table, delta: float) -> np.ndarray:
    """Direct lattice-sum oracle for the drift (slow reference path)."""
    vals = table.states * table.grid.h  # (S, d)
    gz = vals @ gammas.T  # (S, n)
    w = delta * rates / (1.0 + delta * rates)
    n = rates.size
    out = np.zeros(n)
    for i in range(n):
        inner = gz[:, i + 1 :] @ w[i + 1 :]
        out[i] = -float(np.sum(gz[:, i] * inner * table.masses))
    return out


def swaption_payoff(rates_at_expiry: np.ndarray, strike: float, delta: float) -> np.ndarray:
    """(prod_i (1 + delta R^i) - 1 - K delta sum_i prod_{j>i} (1 + delta R^j))_+.

    The inner product runs over the later rates R^j (the natural no-arbitrage
    reading of the annuity term).
    """
    growth = 1.0 + delta * rates_at_expiry  # (n_paths, n)
    total = np.prod(growth, axis=1)
    # annuity: sum_i prod_{j > i} (1 + delta R^j) via reversed cumulative products
    rev = np.cumprod(growth[:, ::-1], axis=1)[:, ::-1]  # prod_{j >= i}
    tail = np.concatenate([rev[:, 1:], np.ones((growth.shape[0], 1))], axis=1)  # prod_{j > i}
    annuity = tail.sum(axis=1)
    return np.maximum(total - 1.0 - strike * delta * annuity, 0.0)


def _fmm_one_path(spec: FMMSpec, times: np.ndarray, dx: np.ndarray, m2: np.ndarray) -> np.ndarray:
    rates = spec.r0.copy()
    t_prev = 0.0
    for j in range(times.size):
        t = times[j]
        gammas = spec.gamma(t_prev)
        drift = fmm_drift(rates, gammas, m2, spec.delta)
        rates = rates * (1.0 + gammas @ dx[j] + drift * (t - t_prev))
        if not np.all(np.isfinite(rates)):
            raise FloatingPointError("non-finite FMM state")
        t_prev = t
    return rates


def simulate_fmm_paths(
    spec: FMMSpec, proc: SchemeProcess, n: int, rng: np.random.Generator, eps_t: float | None = None
) -> np.ndarray:
    """(n, n_rates) rate states at the swaption expiry (single level)."""
    beta = proc.table.measure_t.bg_index()
    eps_t = eps_t or (proc.table.h ** beta if beta > 0 else proc.table.h)
    grid = tuple(det_time_grid(proc.T, eps_t))
    m2 = proc.table.second_moment_matrix()
    out = np.empty((n, spec.n))
    for i in range(n):
        path = simulate_path(proc, "times", rng, obs_times=grid)
        times, dx = driver_increments(path)
        out[i] = _fmm_one_path(spec, times, dx, m2)
    return out


class FMMLevelSampler:
    """MLMC level sampling for the FMM swaption payoff."""

    def __init__(self, ladder: LevelLadder, spec: FMMSpec, chunk: int = 256):
        if not math.isclose(ladder.T, spec.expiry, rel_tol=1e-12):
            raise ValueError("ladder horizon must equal the swaption expiry")
        self.ladder = ladder
        self.spec = spec
        self.chunk = chunk
        self._m2: dict[int, np.ndarray] = {}

    @property
    def beta(self) -> float:
        return self.ladder.beta

    def _m2_for(self, level: int) -> np.ndarray:
        if level not in self._m2:
            self._m2[level] = self.ladder.proc(level).table.second_moment_matrix()
        return self._m2[level]

    def _value(self, spec: FMMSpec, rates: np.ndarray) -> float:
        pay = swaption_payoff(rates[None, :], spec.strike, spec.delta)[0]
        return spec.discount_prefactor() * float(pay)

    def sample_level(self, level: int, n: int, seed: int, tag: int, chunk_offset: int) -> LevelAccum:
        proc = self.ladder.proc(level)
        eps_t = proc.table.h**self.beta if self.beta > 0 else proc.table.h
        grid = tuple(det_time_grid(proc.T, eps_t))
        acc = LevelAccum()
        done = 0
        ci = chunk_offset
        while done < n:
            size = min(self.chunk, n - done)
            rng = substream(seed, tag, level, ci)
            fsum = fsq = dsum = dsq = 0.0
            cost = 0.0
            for _ in range(size):
                if level == 0:
                    path = simulate_path(proc, "times", rng, obs_times=grid)
                    times, dx = driver_increments(path)
                    vf = self._value(self.spec, _fmm_one_path(self.spec, times, dx, self._m2_for(0)))
                    diff = vf
                    cost += path.jump_values.shape[0] + len(grid)
                else:
                    coupler = self.ladder.coupler(level)
                    proc_c = self.ladder.proc(level - 1)
                    pair = simulate_coupled_paths(proc, proc_c, coupler, "times", rng, obs_times=grid)
                    tf, dxf = driver_increments(pair.fine)
                    tc, dxc = driver_increments(pair.coarse)
                    vf = self._value(self.spec, _fmm_one_path(self.spec, tf, dxf, self._m2_for(level)))
                    vc = self._value(self.spec, _fmm_one_path(self.spec, tc, dxc, self._m2_for(level - 1)))
                    diff = vf - vc
                    cost += 2 * (pair.fine.jump_values.shape[0] + len(grid))
                fsum += vf
                fsq += vf * vf
                dsum += diff
                dsq += diff * diff
            acc.add(LevelAccum(n=size, sum_diff=dsum, sumsq_diff=dsq, sum_fine=fsum, sumsq_fine=fsq, cost=cost, chunks=1))
            done += size
            ci += 1
        return acc
