"""SαS variates, LePage ingredients and the constants they need."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from . import kernels
from .measures import MeasureOnN, UnitCube
from .rng import as_generator

__all__ = [
    "check_alpha", "sample_sas", "sas_array", "c_alpha", "sine_integral",
    "gaussian_abs_moment", "lepage_scale", "tail_constant", "gamma_arrivals",
    "sample_sites", "LePageStream", "lepage_stream", "lepage_tail_variance",
    "lepage_j_min", "default_truncation", "MeasureOnN", "UnitCube",
]


def check_alpha(alpha, *, gaussian_ok=True) -> float:
    a = float(alpha)
    if not 0.0 < a <= 2.0 or math.isnan(a):
        raise ValueError(f"alpha must lie in (0, 2], got {alpha}")
    if a == 2.0 and not gaussian_ok:
        raise ValueError("alpha = 2 is the Gaussian case; the LePage representation needs alpha < 2")
    return a


def sas_array(alpha, gen, size):
    """Array of standard SαS variates, E exp(i lam X) = exp(-|lam|^alpha)."""
    if alpha == 2.0:
        return math.sqrt(2.0) * gen.standard_normal(size)
    u = gen.random(size)
    w = None if alpha == 1.0 else gen.standard_exponential(size)
    return kernels.sas_transform(u, w, alpha)


def sample_sas(alpha, rng, size=None):
    """One standard SαS variate (or an array when ``size`` is given)."""
    alpha = check_alpha(alpha)
    gen = as_generator(rng)
    out = sas_array(alpha, gen, 1 if size is None else size)
    return float(out[0]) if size is None else out


def sine_integral(alpha) -> float:
    """int_0^inf x^-alpha sin x dx for 0 < alpha < 2."""
    alpha = check_alpha(alpha, gaussian_ok=False)
    if alpha == 1.0:
        return math.pi / 2
    return math.gamma(1.0 - alpha) * math.cos(math.pi * alpha / 2)


def gaussian_abs_moment(alpha) -> float:
    """E|xi|^alpha for xi standard normal."""
    return 2.0 ** (alpha / 2) * math.gamma((alpha + 1) / 2) / math.sqrt(math.pi)


def c_alpha(alpha) -> float:
    alpha = check_alpha(alpha, gaussian_ok=False)
    return math.sqrt(2.0) * (sine_integral(alpha) * gaussian_abs_moment(alpha)) ** (-1.0 / alpha)


def lepage_scale(alpha) -> float:
    """Overall factor in front of sum Gamma_j^{-1/alpha} xi_j K(t, V_j).

    With xi_j standard normal this equals c_alpha / sqrt(2): that is the value
    for which the series has characteristic function exp(-|lam|^alpha ||K||^alpha).
    """
    return c_alpha(alpha) / math.sqrt(2.0)


def tail_constant(alpha) -> float:
    """C with P(X > t) ~ C t^-alpha for standard SαS (alpha < 2)."""
    alpha = check_alpha(alpha, gaussian_ok=False)
    return math.gamma(alpha) * math.sin(math.pi * alpha / 2) / math.pi


def gamma_arrivals(J, rng):
    if J < 1:
        raise ValueError("J must be >= 1")
    gen = as_generator(rng)
    g = np.cumsum(gen.standard_exponential(J))
    # exponential draws of exactly 0 are possible in principle; keep strict order
    if J > 1 and np.any(np.diff(g) <= 0):
        g = np.maximum.accumulate(g)
        g[1:] = np.maximum(g[1:], np.nextafter(g[:-1], np.inf))
    return g


def sample_sites(measure, J, rng):
    if J < 1:
        raise ValueError("J must be >= 1")
    if measure.total_mass <= 0:
        raise ValueError("measure has zero total mass")
    return measure.sample(J, as_generator(rng))


@dataclass(frozen=True)
class LePageStream:
    gammas: np.ndarray
    sites: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.gammas)
        if g.ndim != 1 or g.size == 0 or g[0] <= 0 or np.any(np.diff(g) <= 0):
            raise ValueError("gammas must be positive and strictly increasing")
        if len(self.sites) != g.size:
            raise ValueError("gammas and sites must have the same length")

    @property
    def truncation(self) -> int:
        return self.gammas.size


def lepage_stream(measure, J, rng) -> LePageStream:
    gen = as_generator(rng)
    return LePageStream(gamma_arrivals(J, gen), sample_sites(measure, J, gen))


def lepage_tail_variance(alpha, J) -> float:
    """sum_{j>J} E Gamma_j^{-2/alpha} = Gamma(J+1-b) / ((b-1) Gamma(J)), b = 2/alpha."""
    b = 2.0 / check_alpha(alpha, gaussian_ok=False)
    return math.exp(special.gammaln(J + 1 - b) - special.gammaln(J)) / (b - 1.0)


def _partial_sum(b, J):
    # sum_{j<=J} j^-b, exact for small J and Euler-Maclaurin beyond
    if J <= 10_000:
        return math.fsum(np.arange(1, J + 1, dtype=float) ** -b)
    return float(special.zeta(b) - special.zeta(b, J + 1))


def lepage_j_min(alpha, rel=1e-4, cap=10**15) -> int:
    """Smallest J with sum_{j>J} j^{-2/alpha} <= rel * sum_{j<=J} j^{-2/alpha}.

    Returns ``cap`` when the bound exceeds it (alpha close to 2).
    """
    b = 2.0 / check_alpha(alpha, gaussian_ok=False)
    def ok(J):
        tail = float(special.zeta(b, J + 1))
        return tail <= rel * _partial_sum(b, J)

    lo, hi = 1, 2
    while not ok(hi):
        lo, hi = hi, hi * 2
        if hi >= cap:
            return cap
    while hi - lo > 1:
        mid = (lo + hi) // 2
        lo, hi = (lo, mid) if ok(mid) else (mid, hi)
    return hi


def default_truncation(alpha) -> int:
    return 10_000 if alpha >= 1.0 else 1_000
