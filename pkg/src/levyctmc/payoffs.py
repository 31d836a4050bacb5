"""Path functionals and closed-form benchmarks: options, CDS, first-to-default.

Payoff objects follow a small protocol consumed by the Monte-Carlo engines:
`evaluate(view) -> (n,) array`, plus `needs_times` and `obs_dates`
attributes telling the simulator what to generate.  Credit payoffs detect
the default time as the first lattice jump at or below a threshold; the
threshold is snapped to the nearest cell edge so the lattice default
intensity is exactly a tail mass of the measure.
"""

from __future__ import annotations

import math
import numpy as np
from scipy import optimize

from .copula import CopulaMeasure
from .models import LevyModel1D
from .pathsim import ExpLevyAsset, PathsView

__all__ = [
    "Put",
    "BestOfPut",
    "AsianCall",
    "EndpointCoordinate",
    "snap_to_cell_edge",
    "default_times",
    "CdsPayoff",
    "FtdPayoff",
    "SurvivalIndicator",
    "survival_probability_closed",
    "cds_legs_closed",
    "implied_spread",
    "level_from_spread",
    "ftd_survival_closed",
    "ControlVariate",
    "fit_control_coefficients",
]


class EndpointCoordinate:
    """f = X_T[coord]; Lipschitz(1) in the driver's sup norm."""

    needs_times = False
    obs_dates = ()
    lipschitz = 1.0

    def __init__(self, coord: int = 0):
        self.coord = coord

    def evaluate(self, view: PathsView) -> np.ndarray:
        return view.endpoints()[:, self.coord]


class Put:
    """Discounted vanilla put (K - S_T)+ on one exp-Levy coordinate."""

    needs_times = False
    obs_dates = ()

    def __init__(self, strike: float, asset: ExpLevyAsset, coord: int = 0):
        self.strike = strike
        self.asset = asset
        self.coord = coord
        self.lipschitz = 1.0  # in the spot; recorded for the Lip checks

    def evaluate(self, view: PathsView) -> np.ndarray:
        s = self.asset.terminal_prices(view)[:, self.coord]
        disc = math.exp(-self.asset.r * view.proc.T)
        return disc * np.maximum(self.strike - s, 0.0)


class BestOfPut:
    """Discounted (K - max_i S^i_T / S^i_0)+ on normalized performances."""

    needs_times = False
    obs_dates = ()

    def __init__(self, strike: float, asset: ExpLevyAsset):
        self.strike = strike
        self.asset = asset
        self.lipschitz = 1.0

    def evaluate(self, view: PathsView) -> np.ndarray:
        s = self.asset.terminal_prices(view) / self.asset.s0[None, :]
        disc = math.exp(-self.asset.r * view.proc.T)
        return disc * np.maximum(self.strike - s.max(axis=1), 0.0)


class AsianCall:
    """Discounted call on the arithmetic average over n_obs dates (basket
    mean across coordinates when d > 1)."""

    needs_times = True

    def __init__(self, strike: float, asset: ExpLevyAsset, T: float, n_obs: int):
        self.strike = strike
        self.asset = asset
        self.obs_dates = tuple(T * (i + 1) / n_obs for i in range(n_obs))
        self.lipschitz = 1.0

    def evaluate(self, view: PathsView) -> np.ndarray:
        s = self.asset.prices_at_obs(view)  # (n, k, d)
        sel = np.isin(view.obs_dates, np.asarray(self.obs_dates))
        avg = s[:, sel, :].mean(axis=(1, 2))
        disc = math.exp(-self.asset.r * view.proc.T)
        return disc * np.maximum(avg - self.strike, 0.0)


# -- default times on the lattice -------------------------------------------


def snap_to_cell_edge(a: float, h: float) -> float:
    """Nearest cell edge (k + 1/2) h to the threshold a."""
    return (round(a / h - 0.5) + 0.5) * h


def default_times(view: PathsView, levels: dict[int, float]) -> np.ndarray:
    """(n,) first jump time with jump_coord <= level per coordinate, inf if none.

    `levels` maps coordinate -> (already snapped) threshold.
    """
    if view.jump_times is None:
        raise ValueError("default detection needs times mode")
    n = view.n
    out = np.full(n, np.inf)
    if view.jump_values.shape[0] == 0:
        return out
    qualifies = np.zeros(view.jump_values.shape[0], dtype=bool)
    for coord, level in levels.items():
        qualifies |= view.jump_values[:, coord] <= level
    if not np.any(qualifies):
        return out
    ids = view.path_ids()[qualifies]
    times = view.jump_times[qualifies]
    np.minimum.at(out, ids, times)
    return out


class SurvivalIndicator:
    """1{tau > t} with tau the first qualifying lattice jump."""

    needs_times = True
    obs_dates = ()

    def __init__(self, levels: dict[int, float], t: float):
        self.levels = levels
        self.t = t

    def evaluate(self, view: PathsView) -> np.ndarray:
        tau = default_times(view, self.levels)
        return (tau > self.t).astype(float)


class CdsPayoff:
    """Per-path CDS present value (protection buyer): default leg - fixed leg."""

    needs_times = True
    obs_dates = ()

    def __init__(self, level: float, T: float, r: float, recovery: float, spread: float, coord: int = 0):
        self.level = level
        self.T = T
        self.r = r
        self.recovery = recovery
        self.spread = spread
        self.coord = coord

    def evaluate(self, view: PathsView) -> np.ndarray:
        tau = default_times(view, {self.coord: self.level})
        return self._pv_from_tau(tau)

    def _pv_from_tau(self, tau: np.ndarray) -> np.ndarray:
        capped = np.minimum(tau, self.T)
        dl = (1.0 - self.recovery) * np.exp(-self.r * tau) * (tau <= self.T)
        if self.r != 0.0:
            annuity = (1.0 - np.exp(-self.r * capped)) / self.r
        else:
            annuity = capped
        return dl - self.spread * annuity


class FtdPayoff(CdsPayoff):
    """First-to-default CDS PV: the earliest qualifying jump in any coordinate."""

    def __init__(self, levels: dict[int, float], T: float, r: float, recovery: float, spread: float):
        super().__init__(level=math.nan, T=T, r=r, recovery=recovery, spread=spread)
        self.levels = levels

    def evaluate(self, view: PathsView) -> np.ndarray:
        tau = default_times(view, self.levels)
        return self._pv_from_tau(tau)


# -- closed forms ------------------------------------------------------------


def survival_probability_closed(model: LevyModel1D, a: float, t: float) -> float:
    """P(tau > t) = exp(-Lambda(a) t) for a constant threshold a < 0."""
    if a >= 0:
        raise ValueError("threshold must be negative")
    if t < 0:
        raise ValueError("t must be non-negative")
    lam = float(model.negative_tail(a))
    return math.exp(-lam * t)


def cds_legs_closed(
    model: LevyModel1D, a: float, T: float, r: float, recovery: float, spread: float
) -> dict[str, float]:
    """Closed-form CDS legs under the exponential default time of level a."""
    lam = float(model.negative_tail(a))
    rl = r + lam
    if rl > 0:
        base = (1.0 - math.exp(-rl * T)) / rl
    else:
        base = T
    dl = (1.0 - recovery) * lam * base
    fl = spread * base
    return {"DL": dl, "FL": fl, "PV": dl - fl}


def implied_spread(pv_target: float, pricer, bracket: tuple[float, float], notional: float = 1.0) -> float:
    """Spread m with pricer(m) = pv_target, |PV - target| <= 1e-10 notional."""
    lo, hi = bracket
    f = lambda m: pricer(m) - pv_target
    if f(lo) * f(hi) > 0:
        raise ValueError("bracket does not straddle the target PV")
    m = optimize.brentq(f, lo, hi, xtol=1e-14, rtol=8.9e-16, maxiter=200)
    if abs(pricer(m) - pv_target) > 1e-10 * notional:
        raise ArithmeticError("root finder did not reach the PV tolerance")
    return m


def level_from_spread(model: LevyModel1D, spread: float, recovery: float) -> float:
    """Threshold a < 0 whose fair CDS spread is `spread` ((1-R) Lambda(a))."""
    target = spread / (1.0 - recovery)
    f = lambda a: float(model.negative_tail(a)) - target
    lo, hi = -50.0, -1e-10
    return optimize.brentq(f, lo, hi, xtol=1e-15, maxiter=300)


def ftd_survival_closed(measure: CopulaMeasure, levels: list[float], t: float) -> float:
    """P(no default by t) for the first-to-default basket.

    d = 2 uses the two-name closed form with the copula evaluated at the
    signed tails; d > 2 extends it by inclusion-exclusion over the joint
    lower-tail boxes (experimental beyond two names).
    """
    d = measure.dim
    if len(levels) != d:
        raise ValueError("one threshold per name required")
    if any(a >= 0 for a in levels):
        raise ValueError("thresholds must be negative")
    lams = [float(measure.margins[i].negative_tail(levels[i])) for i in range(d)]
    if d == 2:
        rho = measure.copula(-lams[0], -lams[1])
        intensity = lams[0] + lams[1] - rho
        return math.exp(-t * intensity)
    intensity = 0.0
    import itertools

    for size in range(1, d + 1):
        for subset in itertools.combinations(range(d), size):
            box = [(-np.inf, np.inf)] * d
            for i in subset:
                box[i] = (-np.inf, levels[i])
            intensity += (-1.0) ** (size + 1) * measure.rectangle_mass(box)
    return math.exp(-t * intensity)


# -- control variates --------------------------------------------------------


def fit_control_coefficients(y: np.ndarray, controls: np.ndarray) -> np.ndarray:
    """Least-squares coefficients of y on centered controls (pilot paths)."""
    x = controls - controls.mean(axis=0, keepdims=True)
    coef, *_ = np.linalg.lstsq(x, y - y.mean(), rcond=None)
    return coef


class ControlVariate:
    """payoff - sum_i c_i (control_i - E[control_i]) with known control means."""

    def __init__(self, payoff, controls: list, control_means: np.ndarray, coefficients: np.ndarray):
        self.payoff = payoff
        self.controls = controls
        self.control_means = np.asarray(control_means, dtype=float)
        self.coefficients = np.asarray(coefficients, dtype=float)
        self.needs_times = bool(getattr(payoff, "needs_times", False)) or any(
            getattr(c, "needs_times", False) for c in controls
        )
        dates: set[float] = set(getattr(payoff, "obs_dates", ()) or ())
        for c in controls:
            dates |= set(getattr(c, "obs_dates", ()) or ())
        self.obs_dates = tuple(sorted(dates))

    def evaluate(self, view: PathsView) -> np.ndarray:
        y = np.asarray(self.payoff.evaluate(view), dtype=float)
        for c, mean, coef in zip(self.controls, self.control_means, self.coefficients):
            y = y - coef * (np.asarray(c.evaluate(view), dtype=float) - mean)
        return y
