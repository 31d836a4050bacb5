"""One-dimensional Levy jump measures with analytic tail queries.

Every model exposes the handful of measure queries the lattice scheme is
built on: signed tail integrals U(x) = sign(x) * lambda(I(x)) with
I(x) = (x, inf) for x >= 0 and (-inf, x] for x < 0, interval masses,
truncated second moments (mass-weighted x^2 over the central cell) and
first moments over bands, plus the Blumenthal-Getoor index of the small
jumps.  Closed forms are used throughout (exponential integrals and
incomplete gamma functions for VG/CGMY); `tail_integral_quad` provides an
independent adaptive-quadrature evaluation used as oracle and fallback.

The HEM model carries the diffusion volatility quoted alongside its jump
parameters; it contributes to the process covariance (see
`pathsim.SchemeProcess`), never to the jump measure queries below.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.special import exp1, gamma as gamma_fn, gammainc, gammaincc

__all__ = [
    "LevyModel1D",
    "HEM",
    "VG",
    "CGMY",
    "TruncatedMeasure1D",
    "tail_integral_quad",
]

QUAD_ABS_TOL = 1e-12


def _gamma_upper(s: float, z) -> float:
    """Upper incomplete gamma Gamma(s, z) for s in (-2, 1], z > 0.

    scipy only covers s > 0; negative orders are reached through the
    recurrence Gamma(s, z) = (Gamma(s+1, z) - z^s e^{-z}) / s.
    """
    if s > 1.0 + 1e-12 or s <= -2.0:
        raise ValueError(f"order {s} outside supported range (-2, 1]")
    z = np.asarray(z, dtype=float)
    if np.any(z <= 0.0):
        raise ValueError("z must be positive")
    if abs(s) < 1e-12:
        out = exp1(z)
    elif s > 0.0:
        out = gammaincc(s, z) * gamma_fn(s)
    else:
        with np.errstate(over="ignore"):
            out = (_gamma_upper(s + 1.0, z) - z**s * np.exp(-z)) / s
    return out if out.ndim else float(out)


class LevyModel1D:
    """Base for the 1D model catalog; subclasses fill in the closed forms.

    Models quoting a diffusion volatility alongside their jump parameters
    (HEM) expose it through `diffusion_vol`; it never enters the
    jump-measure queries.
    """

    @property
    def diffusion_vol(self) -> float:
        return 0.0

    # -- catalog queries -------------------------------------------------
    def bg_index(self) -> float:
        raise NotImplementedError

    def density(self, x):
        """Levy density at x != 0 (used by the quadrature oracle)."""
        raise NotImplementedError

    def positive_tail(self, x):
        """lambda((x, inf)) for x > 0; x = 0 returns the (possibly inf) limit."""
        raise NotImplementedError

    def negative_tail(self, x):
        """lambda((-inf, x]) for x < 0; x = 0 returns the (possibly inf) limit."""
        raise NotImplementedError

    def second_moment(self, a: float) -> float:
        """integral of x^2 over [-a, a]."""
        raise NotImplementedError

    def first_moment(self, a: float, b: float) -> float:
        """integral of x over [a, b], with 0 not in (a, b)."""
        raise NotImplementedError

    # -- derived queries -------------------------------------------------
    def tail_integral(self, x):
        """Signed tail U(x) = sign(x) lambda(I(x)); diverges at x = 0."""
        arr = np.asarray(x, dtype=float)
        if np.any(arr == 0.0):
            raise ValueError("tail integral is not defined at 0")
        out = np.where(arr > 0, self.positive_tail(np.abs(arr)), -np.asarray(self.negative_tail(-np.abs(arr))))
        return out if out.ndim else float(out)

    def interval_mass(self, a: float, b: float) -> float:
        """Mass of [a, b] for an interval on one side of 0 (a <= b).

        a = 0 or b = 0 endpoints are taken as one-sided limits; with an
        infinite-activity model an interval touching 0 has infinite mass.
        """
        if a > b:
            raise ValueError(f"empty interval [{a}, {b}]")
        if a < 0.0 < b:
            raise ValueError("interval straddles 0; split it at 0 first")
        if a == b:
            return 0.0
        if a >= 0.0:
            return self.positive_tail(a) - self.positive_tail(b)
        return self.negative_tail(b) - self.negative_tail(a)

    def truncated_second_moment(self, h: float) -> float:
        """integral of x^2 over the central cell [-h/2, h/2]."""
        if h <= 0.0:
            raise ValueError("h must be positive")
        return self.second_moment(0.5 * h)

    def mass_outside(self, a: float) -> float:
        """lambda(R \\ [-a, a]) for a > 0."""
        return self.positive_tail(a) + self.negative_tail(-a)


@dataclass(frozen=True)
class HEM(LevyModel1D):
    """Hyper-exponential (double-exponential) jump-diffusion jump measure.

    Density: lam * (p*eta1*exp(-eta1*x) for x>0, (1-p)*eta2*exp(eta2*x) for
    x<0).  Finite activity with total mass `lam`; bg index 0.  `sigma` is
    the diffusion volatility quoted with the model.
    """

    lam: float
    p: float
    eta1: float
    eta2: float
    sigma: float = 0.0

    def __post_init__(self):
        if self.lam < 0 or not 0.0 <= self.p <= 1.0:
            raise ValueError("need lam >= 0 and p in [0, 1]")
        if self.eta1 <= 0 or self.eta2 <= 0:
            raise ValueError("decay rates must be positive")

    @property
    def diffusion_vol(self) -> float:
        return self.sigma

    def bg_index(self) -> float:
        return 0.0

    def density(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(over="ignore"):
            pos = self.lam * self.p * self.eta1 * np.exp(-self.eta1 * x)
            neg = self.lam * (1.0 - self.p) * self.eta2 * np.exp(self.eta2 * x)
        return np.where(x > 0, pos, neg)

    def positive_tail(self, x):
        return self.lam * self.p * np.exp(-self.eta1 * np.asarray(x, dtype=float))

    def negative_tail(self, x):
        return self.lam * (1.0 - self.p) * np.exp(self.eta2 * np.asarray(x, dtype=float))

    def second_moment(self, a: float) -> float:
        def one_side(eta):
            z = eta * a
            return (2.0 - math.exp(-z) * (z * z + 2.0 * z + 2.0)) / eta**2

        return self.lam * (self.p * one_side(self.eta1) + (1.0 - self.p) * one_side(self.eta2))

    def first_moment(self, a: float, b: float) -> float:
        if a >= 0.0:
            eta, w = self.eta1, self.lam * self.p
            lo, hi = a, b
        elif b <= 0.0:
            eta, w = self.eta2, self.lam * (1.0 - self.p)
            lo, hi = -b, -a
        else:
            raise ValueError("interval straddles 0")

        def anti(x):  # integral of t*eta*exp(-eta t) from x to inf
            return (x + 1.0 / eta) * math.exp(-eta * x)

        val = w * (anti(lo) - anti(hi))
        return val if a >= 0.0 else -val


@dataclass(frozen=True)
class VG(LevyModel1D):
    """Variance-Gamma jump measure with (sigma, nu, theta) parameters.

    Levy density exp(A x - B|x|) / (nu |x|) with A = theta/sigma^2 and
    B = sqrt(theta^2 + 2 sigma^2/nu)/sigma^2; equivalently a difference of
    gamma subordinators with rates M = B - A (up) and G = B + A (down).
    Infinite activity, finite variation, bg index 0.
    """

    sigma: float
    nu: float
    theta: float

    def __post_init__(self):
        if self.sigma <= 0 or self.nu <= 0:
            raise ValueError("sigma and nu must be positive")

    @property
    def _rates(self) -> tuple[float, float, float]:
        s2 = self.sigma * self.sigma
        b = math.sqrt(self.theta**2 + 2.0 * s2 / self.nu) / s2
        a = self.theta / s2
        return 1.0 / self.nu, b - a, b + a  # c, M (up-decay), G (down-decay)

    def bg_index(self) -> float:
        return 0.0

    def density(self, x):
        x = np.asarray(x, dtype=float)
        c, m, g = self._rates
        ax = np.abs(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(x > 0, c * np.exp(-m * ax) / ax, c * np.exp(-g * ax) / ax)
        return out

    def positive_tail(self, x):
        c, m, _ = self._rates
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            out = np.where(x > 0, c * exp1(np.maximum(m * x, 1e-300)), np.inf)
        return out if out.ndim else float(out)

    def negative_tail(self, x):
        c, _, g = self._rates
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            out = np.where(x < 0, c * exp1(np.maximum(-g * x, 1e-300)), np.inf)
        return out if out.ndim else float(out)

    def second_moment(self, a: float) -> float:
        c, m, g = self._rates

        def one_side(rate):  # integral of x * c * exp(-rate x) on (0, a]
            return c * (1.0 - math.exp(-rate * a) * (1.0 + rate * a)) / rate**2

        return one_side(m) + one_side(g)

    def first_moment(self, a: float, b: float) -> float:
        c, m, g = self._rates
        if a >= 0.0:
            return c * (math.exp(-m * a) - math.exp(-m * b)) / m
        if b <= 0.0:
            return -c * (math.exp(g * b) - math.exp(g * a)) / g
        raise ValueError("interval straddles 0")


@dataclass(frozen=True)
class CGMY(LevyModel1D):
    """CGMY (tempered stable) jump measure.

    Levy density c * exp(-m x) x^{-1-y} for x > 0 and
    c * exp(-g |x|) |x|^{-1-y} for x < 0, with y in (0, 2); bg index y.
    """

    c: float
    g: float
    m: float
    y: float

    def __post_init__(self):
        if self.c <= 0 or self.g <= 0 or self.m <= 0:
            raise ValueError("c, g, m must be positive")
        if not 0.0 < self.y < 2.0:
            raise ValueError("y must be in (0, 2)")

    def bg_index(self) -> float:
        return self.y

    def density(self, x):
        x = np.asarray(x, dtype=float)
        ax = np.abs(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(
                x > 0,
                self.c * np.exp(-self.m * ax) * ax ** (-1.0 - self.y),
                self.c * np.exp(-self.g * ax) * ax ** (-1.0 - self.y),
            )
        return out

    def _one_tail(self, x, rate):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            out = np.where(
                x > 0,
                self.c * rate**self.y * _gamma_upper(-self.y, np.maximum(rate * x, 1e-300)),
                np.inf,
            )
        return out if out.ndim else float(out)

    def positive_tail(self, x):
        return self._one_tail(x, self.m)

    def negative_tail(self, x):
        return self._one_tail(-np.asarray(x, dtype=float), self.g)

    def second_moment(self, a: float) -> float:
        # integral of x^{1-y} e^{-rate x} on (0, a] = rate^{y-2} * lower_gamma(2-y, rate*a)
        def one_side(rate):
            s = 2.0 - self.y
            return self.c * rate ** (-s) * gammainc(s, rate * a) * gamma_fn(s)

        return one_side(self.m) + one_side(self.g)

    def first_moment(self, a: float, b: float) -> float:
        s = 1.0 - self.y

        def band(rate, lo, hi):  # integral of x^{-y} e^{-rate x} on (lo, hi]
            # lo = 0 is integrable only for y < 1; the clamp keeps it finite there
            zlo = max(rate * lo, 1e-300)
            return self.c * rate ** (-s) * (_gamma_upper(s, zlo) - _gamma_upper(s, rate * hi))

        if a >= 0.0:
            return band(self.m, a, b)
        if b <= 0.0:
            return -band(self.g, -b, -a)
        raise ValueError("interval straddles 0")


@dataclass(frozen=True)
class TruncatedMeasure1D(LevyModel1D):
    """`base` with all mass outside [-R, R] removed (the simulated measure)."""

    base: LevyModel1D
    R: float

    def __post_init__(self):
        if self.R <= 0:
            raise ValueError("cutoff R must be positive")

    @property
    def diffusion_vol(self) -> float:
        return self.base.diffusion_vol

    def bg_index(self) -> float:
        return self.base.bg_index()

    def density(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(np.abs(x) <= self.R, self.base.density(x), 0.0)

    def positive_tail(self, x):
        x = np.asarray(x, dtype=float)
        inside = self.base.positive_tail(np.minimum(x, self.R)) - self.base.positive_tail(self.R)
        out = np.where(x >= self.R, 0.0, inside)
        return out if out.ndim else float(out)

    def negative_tail(self, x):
        x = np.asarray(x, dtype=float)
        inside = self.base.negative_tail(np.maximum(x, -self.R)) - self.base.negative_tail(-self.R)
        out = np.where(x <= -self.R, 0.0, inside)
        return out if out.ndim else float(out)

    def second_moment(self, a: float) -> float:
        return self.base.second_moment(min(a, self.R))

    def first_moment(self, a: float, b: float) -> float:
        if a >= 0.0:
            a, b = min(a, self.R), min(b, self.R)
        else:
            a, b = max(a, -self.R), max(b, -self.R)
        if a == b:
            return 0.0
        return self.base.first_moment(a, b)


def tail_integral_quad(model: LevyModel1D, x: float) -> float:
    """Adaptive-quadrature tail integral, the shared oracle/fallback path."""
    if x == 0.0:
        raise ValueError("tail integral is not defined at 0")
    if x > 0:
        val, _ = integrate.quad(
            lambda t: float(model.density(t)), x, np.inf, epsabs=QUAD_ABS_TOL, epsrel=1e-12, limit=200
        )
        return val
    val, _ = integrate.quad(
        lambda t: float(model.density(t)), -np.inf, x, epsabs=QUAD_ABS_TOL, epsrel=1e-12, limit=200
    )
    return -val
