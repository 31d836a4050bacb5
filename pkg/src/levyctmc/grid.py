"""CTMC lattice construction: cell masses, jump sampler, drifts, covariance.

The approximating chain lives on h*Z^d intersected with [-R, R]^d.  Cells
A^h_s are the half-open boxes of side h centered at the lattice points; all
catalog measures are atomless, so endpoint conventions carry no mass and
cells are evaluated as closed boxes.

`build_jump_table` enumerates every cell with positive mass (sparse: cells
below a relative floor are dropped and the dropped mass reported), wires an
O(1) alias sampler (or the log-depth cdf tree) over the normalized masses,
and precomputes the jump compensator mu^{h(lambda)}, the small-jump
covariance C^h with its square root, and the cutoff drift mu~.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .copula import CopulaMeasure
from .models import LevyModel1D, TruncatedMeasure1D
from .sampler import make_sampler

__all__ = [
    "GridSpec",
    "JumpTable",
    "align_truncation",
    "build_jump_table",
    "small_jump_cov",
    "drift_mu_tilde",
    "mu_h_lambda_exact",
    "choose_truncation_by_mass",
    "params_from_eps",
    "psd_sqrt",
]


def _finite_variation(model: LevyModel1D) -> bool:
    return model.bg_index() < 1.0


@dataclass(frozen=True)
class GridSpec:
    """Lattice parameters; R is rounded up to a whole number of cells.

    Level pairs (h, 2h) must share r_eff with an even number of fine cells
    per side; `align_truncation` produces an R that stays aligned across a
    whole geometric level ladder.
    """

    h: float
    R: float
    d: int = 1
    V: float = 1.0
    subcells: int = 16
    state_cap: int = 50_000_000
    mass_floor_rel: float = 1e-16
    sampler_method: str = "auto"

    def __post_init__(self):
        if self.h <= 0 or self.R <= 0:
            raise ValueError("h and R must be positive")
        if self.R < self.h:
            raise ValueError("R must be at least h")
        if self.V not in (0.0, 1.0):
            raise ValueError("cutoff radius V must be 0 or 1")
        if self.subcells < 2 or self.subcells % 2:
            raise ValueError("subcells must be an even integer >= 2")

    @property
    def half_states(self) -> int:
        """K with R_eff = K*h."""
        return max(1, math.ceil(self.R / self.h - 1e-9))

    @property
    def r_eff(self) -> float:
        return self.half_states * self.h

    def coarsened(self) -> "GridSpec":
        """The 2h grid over the same truncation (requires even cell count)."""
        if self.half_states % 2:
            raise ValueError("cell count per side must be even to coarsen")
        return replace(self, h=2.0 * self.h, R=self.r_eff)


def align_truncation(R: float, h_coarsest: float) -> float:
    """Round R up to an even multiple of the coarsest level's h, so every
    level of the ladder h, h/2, h/4, ... shares the same truncation."""
    return 2.0 * h_coarsest * math.ceil(R / (2.0 * h_coarsest) - 1e-12)


def psd_sqrt(mat: np.ndarray, clamp_tol: float = 1e-10) -> np.ndarray:
    """Square root U diag(sqrt(w)) of a symmetric PSD matrix, clamping
    eigenvalues in [-clamp_tol*|mat|, 0) to zero."""
    mat = np.asarray(mat, dtype=float)
    sym = 0.5 * (mat + mat.T)
    w, u = np.linalg.eigh(sym)
    scale = float(np.max(np.abs(w))) if w.size else 0.0
    if scale > 0 and w.min() < -clamp_tol * scale:
        raise ArithmeticError(f"matrix not PSD beyond clamp tolerance: min eig {w.min()}")
    w = np.clip(w, 0.0, None)
    return u * np.sqrt(w)


def truncate_measure(measure, R: float):
    if isinstance(measure, CopulaMeasure):
        return measure.truncated(R)
    if isinstance(measure, TruncatedMeasure1D):
        return TruncatedMeasure1D(measure.base, min(measure.R, R))
    return TruncatedMeasure1D(measure, R)


@dataclass
class JumpTable:
    """The lattice jump distribution plus the scheme's derived quantities."""

    grid: GridSpec
    states: np.ndarray  # (n, d) integer multiples of h
    masses: np.ndarray  # (n,)
    measure_t: object  # truncated measure (TruncatedMeasure1D or CopulaMeasure)
    dropped_mass: float
    mu_h_lambda: np.ndarray = field(init=False)
    C_h: np.ndarray = field(init=False)
    c_h: np.ndarray = field(init=False)
    mu_tilde: np.ndarray = field(init=False)
    total_rate: float = field(init=False)

    def __post_init__(self):
        self.total_rate = float(self.masses.sum())
        # a zero measure has no sampler; simulation then emits no jumps
        self.sampler = make_sampler(self.masses, self.grid.sampler_method) if self.total_rate > 0 else None
        self._index = None
        self._rows: dict[int, tuple[np.ndarray, np.ndarray]] = {}
        self.mu_tilde = drift_mu_tilde(self.measure_t, self.grid, table=self)
        self.mu_h_lambda = self._mu_h_marginal()
        self.C_h = small_jump_cov(self.measure_t, self.grid)
        self.c_h = psd_sqrt(self.C_h)

    # -- geometry ---------------------------------------------------------
    @property
    def d(self) -> int:
        return self.grid.d

    @property
    def h(self) -> float:
        return self.grid.h

    def jump_values(self, idx: np.ndarray) -> np.ndarray:
        """(len(idx), d) jump vectors for sampled state indices."""
        return self.states[idx] * self.grid.h

    def cell_interval(self, axis: int, k: int) -> tuple[float, float]:
        h, r = self.grid.h, self.grid.r_eff
        lo = max((k - 0.5) * h, -r)
        hi = min((k + 0.5) * h, r)
        return lo, hi

    def state_index(self, state) -> int:
        """Index of a lattice state (tuple of integer multiples), -1 if absent."""
        if self._index is None:
            self._index = {tuple(s): i for i, s in enumerate(self.states)}
        return self._index.get(tuple(int(v) for v in np.atleast_1d(state)), -1)

    # -- measure queries --------------------------------------------------
    def box_mass(self, lo, hi) -> float:
        if self.d == 1:
            return float(self.measure_t.interval_mass(float(np.atleast_1d(lo)[0]), float(np.atleast_1d(hi)[0])))
        return self.measure_t.box_mass(lo, hi)

    def cell_mass_from_measure(self, state) -> float:
        state = np.atleast_1d(state)
        lo = [self.cell_interval(j, int(state[j]))[0] for j in range(self.d)]
        hi = [self.cell_interval(j, int(state[j]))[1] for j in range(self.d)]
        return self.box_mass(lo, hi)

    def margin_row_masses(self, axis: int) -> tuple[np.ndarray, np.ndarray]:
        """(k, mass of {x_axis in cell k}) for k = -K..K excluding 0.

        In 1-d these are the cell masses themselves; in d >= 2 each row mass
        is the mass of the slab cell_k x (everything else), truncation
        included.  Exact marginals of the truncated measure, used by the
        compensator and the exponential-moment corrections.
        """
        cached = self._rows.get(axis)
        if cached is not None:
            return cached
        grid = self.grid
        if self.d == 1:
            out = (self.states[:, 0], self.masses)
        else:
            k = np.concatenate([np.arange(-grid.half_states, 0), np.arange(1, grid.half_states + 1)])
            masses = np.empty(k.size)
            full = [(-np.inf, np.inf)] * self.d
            for i, ki in enumerate(k):
                box = list(full)
                box[axis] = self.cell_interval(axis, int(ki))
                masses[i] = self.measure_t.rectangle_mass(box)
            out = (k, masses)
        self._rows[axis] = out
        return out

    def _mu_h_marginal(self) -> np.ndarray:
        """mu^{h(lambda)} via the marginal simplification (n*d terms)."""
        out = np.zeros(self.d)
        for axis in range(self.d):
            k, masses = self.margin_row_masses(axis)
            out[axis] = float(np.sum(k * self.grid.h * masses))
        return out

    def mu_h_exact(self) -> np.ndarray:
        """Full-table compensator sum (the slow reference path)."""
        return np.array(
            [float(np.sum(self.states[:, i] * self.grid.h * self.masses)) for i in range(self.d)]
        )

    def exp_jump_moment(self, axis: int) -> float:
        """sum_s (exp(s_axis) - 1) * mass(s), for martingale corrections."""
        k, masses = self.margin_row_masses(axis)
        return float(np.sum(np.expm1(k * self.grid.h) * masses))

    def second_moment_matrix(self) -> np.ndarray:
        """sum_s s s^T mass(s) over the table."""
        vals = self.states * self.grid.h
        return np.einsum("ni,nj,n->ij", vals, vals, self.masses)

    def c_h_residual(self) -> float:
        """Estimated Riemann-refinement residual of C^h (max-norm).

        The d >= 2 covariance is a subcells^d midpoint sum; the residual is
        the change under halving the refinement.  0 in 1-d (closed form).
        """
        if self.d == 1 or self.grid.V == 0.0:
            return 0.0
        coarse_grid = replace(self.grid, subcells=max(2, self.grid.subcells // 2))
        coarse = small_jump_cov(self.measure_t, coarse_grid)
        return float(np.max(np.abs(self.C_h - coarse)))


def mu_h_lambda_exact(table: JumpTable) -> np.ndarray:
    """Slow exact compensator: the full-table sum over states."""
    return table.mu_h_exact()


# -- lattice enumeration ----------------------------------------------------


def _lattice_1d(model: TruncatedMeasure1D, grid: GridSpec):
    K, h, r = grid.half_states, grid.h, grid.r_eff
    edges = np.minimum((np.arange(1, K + 2) - 0.5) * h, r)
    upos = np.asarray(model.positive_tail(edges), dtype=float)
    masses_pos = upos[:-1] - upos[1:]
    uneg = np.asarray(model.negative_tail(-edges), dtype=float)
    masses_neg = uneg[:-1] - uneg[1:]
    k = np.concatenate([-np.arange(1, K + 1)[::-1], np.arange(1, K + 1)])
    masses = np.concatenate([masses_neg[::-1], masses_pos])
    return k.reshape(-1, 1), masses


def _axis_pair_tables(measure: CopulaMeasure, grid: GridSpec, axis: int):
    """Per-cell (value-index, weight) tables of the corner-pair lists.

    Returns (values, idx, wts) with idx, wts shaped (2K+1, 4); slot value 0
    (tail value 0 -> F = 0) pads unused slots.
    """
    K, h, r = grid.half_states, grid.h, grid.r_eff
    margin = measure.margins[axis]
    pos_edges = np.minimum((np.arange(1, K + 2) - 0.5) * h, r)
    upos = np.asarray(margin.tail_integral(pos_edges), dtype=float)
    uneg = np.asarray(margin.tail_integral(-pos_edges), dtype=float)
    u0p = float(margin.positive_tail(0.0))
    u0m = -float(margin.negative_tail(0.0))
    # value vector: [0 (pad), +inf, -inf, u0p, u0m, upos..., uneg...]
    values = np.concatenate([[0.0, np.inf, -np.inf, u0p, u0m], upos, uneg])
    POS0 = 5
    NEG0 = 5 + upos.size
    ncells = 2 * K + 1
    idx = np.zeros((ncells, 4), dtype=np.int64)
    wts = np.zeros((ncells, 4), dtype=float)
    for row, k in enumerate(range(-K, K + 1)):
        if k > 0:
            idx[row, :2] = (POS0 + k - 1, POS0 + k)
            wts[row, :2] = (1.0, -1.0)
        elif k < 0:
            idx[row, :2] = (NEG0 - k - 1, NEG0 - k)
            wts[row, :2] = (-1.0, 1.0)
        else:
            # central cell [-h/2, h/2]: the crossing pair list
            idx[row] = (NEG0, POS0, 1, 2)
            wts[row] = (1.0, -1.0, 1.0, -1.0)
    return values, idx, wts


def _lattice_nd(measure: CopulaMeasure, grid: GridSpec):
    d, K = grid.d, grid.half_states
    ncells = 2 * K + 1
    if ncells**d > grid.state_cap:
        h_min = 2.0 * grid.r_eff / max(grid.state_cap ** (1.0 / d) - 1.0, 1.0)
        raise MemoryError(
            f"{ncells}^{d} candidate states exceed the cap {grid.state_cap}; "
            f"at R = {grid.r_eff:g} the step must satisfy h >= {h_min:.3g} "
            f"(or lower R / raise grid.state_cap)"
        )
    axes = [_axis_pair_tables(measure, grid, a) for a in range(d)]
    if d > 3:
        raise NotImplementedError("lattices beyond d = 3 are not supported")
    grids = np.meshgrid(*[a[0] for a in axes], indexing="ij")
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        fgrid = measure.copula(*grids)
    mass = np.zeros((ncells,) * d)
    center = (K,) * d
    slot_iter = itertools.product(range(4), repeat=d)
    with np.errstate(invalid="ignore"):
        for slots in slot_iter:
            w = None
            gather = []
            for axis, slot in enumerate(slots):
                _, idx, wts = axes[axis]
                shape = [1] * d
                shape[axis] = ncells
                gather.append(idx[:, slot].reshape(shape))
                wa = wts[:, slot].reshape(shape)
                w = wa if w is None else w * wa
            if not np.any(w):
                continue
            mass += w * fgrid[tuple(np.broadcast_arrays(*gather))]
    mass[center] = 0.0
    states = np.stack([g.ravel() for g in np.meshgrid(*[np.arange(-K, K + 1)] * d, indexing="ij")], axis=1)
    mass = mass.ravel()
    keep = np.ones(mass.size, dtype=bool)
    keep[np.ravel_multi_index(center, (ncells,) * d)] = False
    states, mass = states[keep], mass[keep]
    # clamp floating-point negatives, abort when they are not mere noise
    scale = float(np.max(mass)) if mass.size else 0.0
    neg = mass < 0
    if np.any(mass < -1e-12 * scale):
        raise ArithmeticError(f"cell masses below clamp tolerance: min {mass.min()} vs scale {scale}")
    if neg.sum() > 0.001 * mass.size:
        raise ArithmeticError(f"{neg.sum()} of {mass.size} cells needed clamping")
    mass[neg] = 0.0
    return states, mass


def build_jump_table(measure, grid: GridSpec) -> JumpTable:
    """Enumerate the lattice cells of `measure` truncated at grid.r_eff."""
    if isinstance(measure, CopulaMeasure):
        if measure.dim != grid.d:
            raise ValueError("grid dimension must match the measure")
        margins = measure.margins
    else:
        if grid.d != 1:
            raise ValueError("a 1-d model needs a 1-d grid")
        margins = [measure]
    if grid.V == 0.0 and not all(_finite_variation(m) for m in margins):
        raise ValueError("V = 0 requires every margin to have finite variation")
    measure_t = truncate_measure(measure, grid.r_eff)
    if grid.d == 1:
        states, masses = _lattice_1d(measure_t, grid)
    else:
        states, masses = _lattice_nd(measure_t, grid)
    total = masses.sum()
    floor = grid.mass_floor_rel * total
    keep = masses > floor
    dropped = float(masses[~keep].sum())
    return JumpTable(grid=grid, states=states[keep], masses=masses[keep], measure_t=measure_t, dropped_mass=dropped)


def small_jump_cov(measure_t, grid: GridSpec) -> np.ndarray:
    """C^h: second moments of the measure over A^h_0, inside [-V, V]^d.

    1-d uses the closed-form truncated second moment.  In d >= 2 the cell is
    integrated by midpoint Riemann sums over a subcells^d refinement, plus
    the lower-dimensional strata where some coordinates are exactly 0 (mass
    the copula construction leaves on the axes when margins have finite
    activity).
    """
    d = grid.d
    if grid.V == 0.0:
        return np.zeros((d, d))
    b = min(0.5 * grid.h, grid.V)
    if d == 1:
        return np.array([[measure_t.second_moment(b)]])
    ks = grid.subcells
    edges = np.linspace(-b, b, ks + 1)
    mids = 0.5 * (edges[:-1] + edges[1:])
    cov = np.zeros((d, d))

    def slice_mass(box: list[tuple[float, float]], pinned: tuple[int, ...]) -> float:
        if not pinned:
            return measure_t.rectangle_mass(box)
        p, rest = pinned[0], pinned[1:]
        whole = list(box)
        whole[p] = (-b, b)
        up = list(box)
        up[p] = (0.0, b)
        dn = list(box)
        dn[p] = (-b, 0.0)
        return slice_mass(whole, rest) - slice_mass(up, rest) - slice_mass(dn, rest)

    for pinned_size in range(d):
        for pinned in itertools.combinations(range(d), pinned_size):
            free = [a for a in range(d) if a not in pinned]
            for combo in itertools.product(range(ks), repeat=len(free)):
                box = [(0.0, 0.0)] * d
                mid = np.zeros(d)
                for a, ci in zip(free, combo):
                    box[a] = (edges[ci], edges[ci + 1])
                    mid[a] = mids[ci]
                mass = slice_mass(box, pinned)
                if mass > 0.0:
                    cov += mass * np.outer(mid, mid)
    return 0.5 * (cov + cov.T)


def drift_mu_tilde(measure_t, grid: GridSpec, table: JumpTable | None = None) -> np.ndarray:
    """mu~: first moment of the measure outside the cutoff cube [-V, V]^d.

    1-d uses closed forms; d >= 2 sums s * mass(s) over the lattice states
    outside the cube (an O(h) cell-center approximation of the integral).
    """
    d, r, v = grid.d, grid.r_eff, grid.V
    if v == 0.0:
        # triplet taken without compensation: the whole jump mean sits here
        if d == 1:
            return np.array([measure_t.first_moment(0.0, r) + measure_t.first_moment(-r, 0.0)])
        if table is None:
            raise ValueError("d >= 2 cutoff drift needs the jump table")
        return np.einsum("ni,n->i", table.states * grid.h, table.masses)
    if r <= v:
        return np.zeros(d)
    if d == 1:
        return np.array([measure_t.first_moment(v, r) + measure_t.first_moment(-r, -v)])
    if table is None:
        raise ValueError("d >= 2 cutoff drift needs the jump table")
    outside = np.max(np.abs(table.states * grid.h), axis=1) > v
    return np.einsum("ni,n->i", table.states[outside] * grid.h, table.masses[outside])


def choose_truncation_by_mass(measure, h: float, ratio: float = 0.99999) -> float:
    """Smallest lattice-aligned R with per-axis coverage >= ratio.

    Coverage on an axis is the mass of [-R, -h/2] u [h/2, R] relative to
    all mass beyond +-h/2; the returned R is the largest over the axes.
    """
    if not 0.0 < ratio < 1.0:
        raise ValueError("ratio must be in (0, 1)")
    margins = measure.margins if isinstance(measure, CopulaMeasure) else [measure]

    def axis_k(margin: LevyModel1D) -> int:
        denom = float(margin.positive_tail(0.5 * h)) + float(margin.negative_tail(-0.5 * h))

        def covered(k: int) -> bool:
            out = float(margin.positive_tail(k * h)) + float(margin.negative_tail(-k * h))
            return denom - out >= ratio * denom

        k = 2
        while not covered(k):
            k *= 2
            if k * h > 1e6:
                raise ArithmeticError("truncation search diverged")
        lo = k // 2
        while lo + 1 < k:
            mid = (lo + k) // 2
            if covered(mid):
                k = mid
            else:
                lo = mid
        return k + (k % 2)

    return h * max(axis_k(m) for m in margins)


def params_from_eps(eps: float, beta: float, d_v: float, d_b: float, d_t: float) -> tuple[float, float, int]:
    """(h, R, n) for a target root-mean-square error, from the MSE split."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    if not 0.0 <= beta < 2.0:
        raise ValueError("beta must lie in [0, 2)")
    h = (3.0 * d_b) ** (-1.0 / (2.0 - beta)) * eps ** (2.0 / (2.0 - beta))
    r = math.sqrt(3.0 * d_t) / eps
    n = math.ceil(3.0 * d_v / eps**2)
    return h, r, n
