"""Discrete samplers for the lattice jump distribution.

Two interchangeable backends:

  * `AliasSampler` (Vose).  O(n) build, O(1) work per draw.
  * `CdfSampler`.  Binary search over cumulative masses, i.e. the complete
    binary tree laid out in an array; ceil(log2 n) comparisons per draw.

Both report an `ops_per_draw` figure used by the engine's abstract cost
counter, and both draw from the exact normalized mass function.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = ["AliasSampler", "CdfSampler", "make_sampler"]


class AliasSampler:
    def __init__(self, masses: np.ndarray):
        masses = np.asarray(masses, dtype=float)
        if masses.ndim != 1 or masses.size == 0:
            raise ValueError("need a non-empty 1-d mass vector")
        if np.any(masses < 0) or not np.all(np.isfinite(masses)):
            raise ValueError("masses must be finite and non-negative")
        total = masses.sum()
        if total <= 0:
            raise ValueError("total mass must be positive")
        n = masses.size
        scaled = masses * (n / total)
        alias = np.zeros(n, dtype=np.int64)
        prob = np.ones(n, dtype=float)
        small = [i for i in range(n) if scaled[i] < 1.0]
        large = [i for i in range(n) if scaled[i] >= 1.0]
        scaled = scaled.copy()
        while small and large:
            s = small.pop()
            g = large.pop()
            prob[s] = scaled[s]
            alias[s] = g
            scaled[g] = scaled[g] - (1.0 - scaled[s])
            (small if scaled[g] < 1.0 else large).append(g)
        for rest in (small, large):
            for i in rest:
                prob[i] = 1.0
        self.n = n
        self._alias = alias
        self._prob = prob
        self.ops_per_draw = 2.0  # one uniform cell pick + one comparison

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        kk = rng.integers(0, self.n, size=size)
        u = rng.random(size)
        return np.where(u < self._prob[kk], kk, self._alias[kk])


class CdfSampler:
    def __init__(self, masses: np.ndarray):
        masses = np.asarray(masses, dtype=float)
        if masses.ndim != 1 or masses.size == 0:
            raise ValueError("need a non-empty 1-d mass vector")
        self.n = masses.size
        self._cum = np.cumsum(masses)
        self._total = float(self._cum[-1])
        if self._total <= 0:
            raise ValueError("total mass must be positive")
        self.ops_per_draw = float(math.ceil(math.log2(max(self.n, 2))) + 1)

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        u = rng.random(size) * self._total
        idx = np.searchsorted(self._cum, u, side="right")
        return np.minimum(idx, self.n - 1)


ALIAS_STATE_CAP = 30_000_000  # both alias arrays stay under ~0.5 GB


def make_sampler(masses: np.ndarray, method: str = "auto"):
    if method == "auto":
        method = "alias" if np.size(masses) <= ALIAS_STATE_CAP else "cdf"
    if method == "alias":
        return AliasSampler(masses)
    if method == "cdf":
        return CdfSampler(masses)
    raise ValueError(f"unknown sampler method {method!r}")
