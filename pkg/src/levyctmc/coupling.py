"""Level coupling: joint simulation of the h- and 2h-lattice chains.

Every jump of the fine chain is marked with a displacement m in {-h, 0, h}^d
such that s + m lands on the coarse lattice; conditional on the fine jump
size s, the mark law is

    p(s, m) = mass(A^{2h}_{s+m} & A^h_s) / mass(A^h_s)

(a point mass at 0 when s is already a coarse lattice point).  The coarse
chain's jumps are the displaced fine jumps, with jumps landing at 0 pruned.
The construction leaves the coarse marginal law exactly that of a fresh
2h-level chain; `verify_rate_identity` checks the underlying rate identity

    sum_m mass(A^{2h}_z & A^h_{z-m}) = mass(A^{2h}_z)   for every coarse z,

cell by cell.  Both chains share the Brownian drivers W and B and carry
their own compensators, so per-jump displacements never exceed h in the
supremum norm.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .grid import JumpTable
from .pathsim import PathBatch, PathSkeleton, SchemeProcess, sample_poisson, simulate_batch

__all__ = [
    "MarkDistribution",
    "CouplingSampler",
    "mark_distribution",
    "sample_coupled_jump",
    "RateIdentityReport",
    "verify_rate_identity",
    "CoupledPathPair",
    "simulate_coupled_paths",
    "simulate_coupled_batch",
]

PRUNED = "PRUNED"


@dataclass
class MarkDistribution:
    """Conditional mark law for one fine state (marks in h units)."""

    state: np.ndarray  # (d,) h-multiples
    marks: np.ndarray  # (n_m, d) entries in {-1, 0, +1}
    probs: np.ndarray  # (n_m,)

    def support_size(self) -> int:
        return int(self.marks.shape[0])


def _intersection_box(table_h: JumpTable, state: np.ndarray, mark: np.ndarray):
    """Per-axis interval of A^{2h}_{s+m} & A^h_s, clipped at the truncation."""
    h, r = table_h.grid.h, table_h.grid.r_eff
    lo = np.empty(table_h.d)
    hi = np.empty(table_h.d)
    for j in range(table_h.d):
        k, m = int(state[j]), int(mark[j])
        if m == 0:
            lo[j], hi[j] = table_h.cell_interval(j, k)
        elif m == 1:
            lo[j], hi[j] = k * h, (k + 0.5) * h
        else:
            lo[j], hi[j] = (k - 0.5) * h, k * h
        lo[j], hi[j] = max(lo[j], -r), min(hi[j], r)
        if lo[j] >= hi[j]:
            return None
    return lo, hi


def mark_distribution(table_h: JumpTable, state) -> MarkDistribution:
    """Mark pmf for a fine state (h-multiples); the residual option takes
    1 - sum(others) so the pmf is exactly normalized."""
    state = np.atleast_1d(np.asarray(state, dtype=np.int64))
    odd_axes = [j for j in range(table_h.d) if state[j] % 2 != 0]
    if not odd_axes:
        return MarkDistribution(state, np.zeros((1, table_h.d), dtype=np.int64), np.ones(1))
    idx = table_h.state_index(state)
    cell_mass = table_h.masses[idx] if idx >= 0 else table_h.cell_mass_from_measure(state)
    marks = np.zeros((2 ** len(odd_axes), table_h.d), dtype=np.int64)
    for row, combo in enumerate(itertools.product((-1, 1), repeat=len(odd_axes))):
        for j, m in zip(odd_axes, combo):
            marks[row, j] = m
    if cell_mass <= 0.0:
        # dead branch of the definition: states with zero mass never occur
        return MarkDistribution(state, np.zeros((1, table_h.d), dtype=np.int64), np.ones(1))
    probs = np.empty(marks.shape[0])
    for row in range(marks.shape[0] - 1):
        box = _intersection_box(table_h, state, marks[row])
        probs[row] = 0.0 if box is None else table_h.box_mass(*box) / cell_mass
    resid = 1.0 - probs[:-1].sum()
    if resid < -1e-12:
        raise ArithmeticError(f"mark pmf residual {resid} for state {state}")
    probs[-1] = max(resid, 0.0)
    return MarkDistribution(state, marks, probs)


def sample_coupled_jump(dist: MarkDistribution, state, rng: np.random.Generator):
    """Draw one mark; the coarse jump is s + m, pruned when it lands at 0."""
    state = np.atleast_1d(np.asarray(state, dtype=np.int64))
    u = rng.random()
    row = int(np.searchsorted(np.cumsum(dist.probs), u, side="left"))
    row = min(row, dist.marks.shape[0] - 1)
    coarse = state + dist.marks[row]
    if np.all(coarse == 0):
        return {"fine": state, "coarse": PRUNED}
    return {"fine": state, "coarse": coarse}


class CouplingSampler:
    """Vectorized mark sampling with per-state pmf caching.

    pmfs are computed on first sight of a state and cached once the state
    has been visited more than `cache_threshold` times (memory control on
    large lattices; correctness never depends on a cache hit).
    """

    def __init__(self, table_h: JumpTable, table_2h: JumpTable, cache_threshold: int = 8):
        if not math.isclose(table_2h.grid.h, 2.0 * table_h.grid.h, rel_tol=1e-12):
            raise ValueError("coarse table must live on the doubled lattice")
        if table_h.grid.half_states % 2:
            raise ValueError("fine grid needs an even cell count per side")
        if not math.isclose(table_2h.grid.r_eff, table_h.grid.r_eff, rel_tol=1e-12):
            raise ValueError("both levels must share the truncation radius")
        self.table_h = table_h
        self.table_2h = table_2h
        self.cache_threshold = cache_threshold
        self._cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}
        self._visits: dict[int, int] = {}

    def _pmf_for_index(self, idx: int) -> tuple[np.ndarray, np.ndarray]:
        cached = self._cache.get(idx)
        if cached is not None:
            return cached
        dist = mark_distribution(self.table_h, self.table_h.states[idx])
        out = (dist.marks, np.cumsum(dist.probs))
        visits = self._visits.get(idx, 0) + 1
        self._visits[idx] = visits
        if visits > self.cache_threshold:
            self._cache[idx] = out
        return out

    def marks_for(self, jump_idx: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """(M, d) marks in h units for a batch of fine jump state indices."""
        m = jump_idx.size
        d = self.table_h.d
        if m == 0:
            return np.zeros((0, d), dtype=np.int64)
        uniq, inv = np.unique(jump_idx, return_inverse=True)
        max_m = 2**d
        cum = np.ones((uniq.size, max_m))
        mk = np.zeros((uniq.size, max_m, d), dtype=np.int64)
        for row, idx in enumerate(uniq):
            marks, cdf = self._pmf_for_index(int(idx))
            cum[row, : cdf.size] = cdf
            cum[row, cdf.size :] = cdf[-1]
            mk[row, : marks.shape[0]] = marks
            if marks.shape[0] < max_m:
                mk[row, marks.shape[0] :] = marks[-1]
        u = rng.random(m)
        slot = (u[:, None] > cum[inv]).sum(axis=1)
        out = mk[inv, slot]
        if np.any(np.abs(out) > 1):
            raise AssertionError("mark outside {-h, 0, h}^d")
        return out


@dataclass
class RateIdentityReport:
    max_rel_error: float
    worst_state: tuple
    total_rate_coarse: float
    induced_total: float
    n_cells: int

    @property
    def passed(self) -> bool:
        return self.max_rel_error <= 1e-10


def verify_rate_identity(table_h: JumpTable, table_2h: JumpTable, tol: float = 1e-10) -> RateIdentityReport:
    """Check sum_m mass(A^{2h}_z & A^h_{z-m}) = mass(A^{2h}_z) per coarse cell."""
    if not math.isclose(table_2h.grid.h, 2.0 * table_h.grid.h, rel_tol=1e-12):
        raise ValueError("tables are not an (h, 2h) pair")
    d = table_h.d
    marks = list(itertools.product((-1, 0, 1), repeat=d))
    worst = 0.0
    worst_state: tuple = ()
    induced_total = 0.0
    for i in range(table_2h.states.shape[0]):
        z2 = table_2h.states[i]  # 2h units
        z = 2 * z2  # h units
        rhs = float(table_2h.masses[i])
        lhs = 0.0
        for mk in marks:
            fine = z - np.asarray(mk, dtype=np.int64)
            box = _intersection_box(table_h, fine, np.asarray(mk, dtype=np.int64))
            if box is None:
                continue
            lhs += table_h.box_mass(*box)
        induced_total += lhs
        rel = abs(lhs - rhs) / max(rhs, 1e-300)
        if rel > worst:
            worst, worst_state = rel, tuple(int(v) for v in z2)
    report = RateIdentityReport(
        max_rel_error=worst,
        worst_state=worst_state,
        total_rate_coarse=table_2h.total_rate,
        induced_total=induced_total,
        n_cells=table_2h.states.shape[0],
    )
    if worst > tol:
        raise ArithmeticError(
            f"coupling rate identity violated: max rel error {worst} at coarse state {worst_state}"
        )
    return report


@dataclass
class CoupledPathPair:
    """A joint (fine, coarse) realization sharing W and B."""

    fine: PathSkeleton
    coarse: PathSkeleton
    marks: np.ndarray  # (N, d) in h units
    pruned: np.ndarray  # (N,) bool

    @property
    def endpoint_difference(self) -> np.ndarray:
        return self.fine.endpoint_value - self.coarse.endpoint_value


def simulate_coupled_paths(
    proc_h: SchemeProcess,
    proc_2h: SchemeProcess,
    coupler: CouplingSampler,
    mode: str,
    rng: np.random.Generator,
    obs_times: tuple[float, ...] = (),
) -> CoupledPathPair:
    """One coupled pair; `counts` mode uses a single time segment."""
    table = proc_h.table
    h = table.grid.h
    n_jumps = sample_poisson(proc_h.jump_rate * proc_h.T, rng)
    idx = table.sampler.draw(rng, n_jumps) if n_jumps else np.zeros(0, dtype=np.int64)
    if mode == "times":
        times = np.sort(rng.random(n_jumps) * proc_h.T)
        skel = np.unique(np.concatenate([times, np.asarray(obs_times, dtype=float), [proc_h.T]]))
        skel = skel[(skel > 0) & (skel <= proc_h.T)]
    elif mode == "counts":
        times = None
        skel = np.array([proc_h.T])
    else:
        raise ValueError("mode must be 'counts' or 'times'")
    dts = np.diff(np.concatenate([[0.0], skel]))
    w_inc = rng.standard_normal((skel.size, table.d)) * np.sqrt(dts)[:, None]
    b_inc = rng.standard_normal((skel.size, table.d)) * np.sqrt(dts)[:, None]
    marks = coupler.marks_for(idx, rng)
    fine_vals = table.jump_values(idx) if idx.size else np.zeros((0, table.d))
    coarse_vals = fine_vals + marks * h
    pruned = np.all(np.abs(coarse_vals) < 1e-15, axis=1) if idx.size else np.zeros(0, dtype=bool)
    fine = PathSkeleton(
        proc_h, "times", idx, fine_vals, jump_times=times, skeleton_times=skel, w_increments=w_inc, b_increments=b_inc
    )
    coarse = PathSkeleton(
        proc_2h, "times", idx, coarse_vals, jump_times=times, skeleton_times=skel, w_increments=w_inc, b_increments=b_inc
    )
    return CoupledPathPair(fine=fine, coarse=coarse, marks=marks, pruned=pruned)


def simulate_coupled_batch(
    proc_h: SchemeProcess,
    proc_2h: SchemeProcess,
    coupler: CouplingSampler,
    n: int,
    rng: np.random.Generator,
    obs_dates: tuple[float, ...] = (),
    needs_times: bool = False,
) -> PathBatch:
    """Vectorized coupled batch; the returned batch serves both level views."""
    if proc_h.T != proc_2h.T:
        raise ValueError("levels must share the horizon")
    batch = simulate_batch(
        proc_h, n, rng, obs_dates=obs_dates, needs_times=needs_times, split_brownian=True
    )
    marks = coupler.marks_for(batch.jump_idx, rng)
    fine_vals = proc_h.table.jump_values(batch.jump_idx) if batch.jump_idx.size else np.zeros((0, proc_h.d))
    batch.proc_coarse = proc_2h
    batch.jump_coarse = fine_vals + marks * proc_h.table.grid.h
    batch.ops += float(batch.jump_idx.size)
    return batch
