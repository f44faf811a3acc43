"""Site distributions for LePage series: a measure on the positive integers
(explicit head plus an analytic tail mass) and the uniform law on a unit cube."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class UnitCube:
    """Lebesgue measure on [0, 1]^d."""

    d: int = 1

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("dimension must be >= 1")

    @property
    def total_mass(self) -> float:
        return 1.0

    def sample(self, J, gen):
        if self.d == 1:
            return gen.random(J)
        return gen.random((J, self.d))


class MeasureOnN:
    """Probability measure on {1, 2, ...}.

    ``weights[k-1]`` is sigma_k for k <= k_max; ``tail_mass`` is sigma of
    {k_max + 1, ...}, kept analytically. Weights are normalized on construction.
    """

    def __init__(self, weights, tail_mass=0.0, name=""):
        w = np.asarray(weights, dtype=float)
        if w.ndim != 1 or w.size == 0:
            raise ValueError("weights must be a non-empty 1-d array")
        if np.any(w < 0) or not np.all(np.isfinite(w)) or tail_mass < 0:
            raise ValueError("weights must be finite and nonnegative")
        total = math.fsum(w) + float(tail_mass)
        if total <= 0:
            raise ValueError("measure has zero total mass")
        self.weights = w / total
        self.tail_mass = float(tail_mass) / total
        self.name = name
        self.weights.setflags(write=False)
        self._cdf = None

    def __repr__(self):
        return f"MeasureOnN(name={self.name!r}, k_max={self.k_max}, tail_mass={self.tail_mass:.3g})"

    @property
    def k_max(self) -> int:
        return self.weights.size

    @property
    def total_mass(self) -> float:
        return 1.0

    def tails(self):
        """T_k = sigma([k, inf)) for k = 1..k_max+1."""
        rev = np.cumsum(self.weights[::-1])[::-1] + self.tail_mass
        return np.append(rev, self.tail_mass)

    @property
    def cdf(self):
        if self._cdf is None:
            c = np.cumsum(self.weights)
            c.setflags(write=False)
            self._cdf = c
        return self._cdf

    def sample(self, J, gen):
        """Inverse-CDF draws. Draws landing in the tail become distinct
        singletons k_max + 1, k_max + 2, ... in draw order."""
        u = gen.random(J)
        idx = np.searchsorted(self.cdf, u, side="right")
        sites = idx.astype(np.int64) + 1
        beyond = idx >= self.k_max
        if beyond.any():
            sites[beyond] = self.k_max + 1 + np.arange(int(beyond.sum()))
        return sites
