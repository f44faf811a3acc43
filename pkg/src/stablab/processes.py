"""SαS processes given by kernels K(t, s) on [0, 1], sampled on uniform grids.

Two samplers are provided. The increment sampler integrates |K|^alpha exactly
over each grid cell, so every grid-point marginal is exact. The LePage sampler
draws the conditionally Gaussian series and is used as an independent check.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.fft
from scipy import integrate, special

from . import kernels
from .errors import BudgetError
from .measures import UnitCube
from .rng import as_generator
from .stable import (
    LePageStream, check_alpha, default_truncation, lepage_j_min, lepage_scale,
    lepage_stream, lepage_tail_variance, sas_array, tail_constant,
)

# ---------------------------------------------------------------- kernels


@dataclass(frozen=True)
class LevyMotion:
    d = 1

    def check(self, alpha):
        check_alpha(alpha)

    def alpha_norm(self, t, alpha):
        """||K(t, .)||_alpha^alpha."""
        return np.asarray(t, dtype=float)

    def evaluate(self, t, s, alpha):
        return (s <= t).astype(float)

    def l2_cov(self, t1, t2, alpha):
        return min(t1, t2)


@dataclass(frozen=True)
class RiemannLiouville:
    H: float
    d = 1

    def check(self, alpha):
        alpha = check_alpha(alpha)
        if not self.H > max(0.0, 1.0 / alpha - 1.0):
            raise ValueError(
                f"Riemann-Liouville kernel needs H > max(0, 1/alpha - 1); got H={self.H}, alpha={alpha}")

    def alpha_norm(self, t, alpha):
        a = alpha * self.H
        return np.asarray(t, dtype=float) ** a / a

    def evaluate(self, t, s, alpha):
        e = self.H - 1.0 / alpha
        out = np.zeros(np.shape(s))
        m = s < t
        out[m] = (t - s[m]) ** e
        return out

    def l2_ok(self, alpha):
        return 2.0 * (self.H - 1.0 / alpha) > -1.0

    def l2_cov(self, t1, t2, alpha):
        e = self.H - 1.0 / alpha
        lo = min(t1, t2)
        if t1 == t2:
            return t1 ** (2 * e + 1) / (2 * e + 1)
        val, _ = integrate.quad(lambda s: (t1 - s) ** e * (t2 - s) ** e, 0.0, lo, limit=200)
        return val

    def cell_filter(self, G, alpha, power=None):
        """f_m = (int over the cell at lag m of K^p)^{1/p}, m = 0..G-1."""
        p = alpha if power is None else power
        a = p * (self.H - 1.0 / alpha) + 1.0
        m = np.arange(G + 1, dtype=float) / G
        return (np.diff(m ** a) / a) ** (1.0 / p)


@dataclass(frozen=True)
class PowerWeight:
    """rho(t) = t**kappa."""

    kappa: float

    def __call__(self, t):
        return np.asarray(t, dtype=float) ** self.kappa


@dataclass(frozen=True)
class WeightedLevy:
    """rho(t) Z(t) with Z standard SαS Lévy motion."""

    weight: Callable = field(default=PowerWeight(0.0))
    d = 1

    def check(self, alpha):
        check_alpha(alpha)

    def rho(self, t):
        r = np.asarray(self.weight(t), dtype=float)
        if np.any(r < 0) or not np.all(np.isfinite(r)):
            raise ValueError("weight must be finite and nonnegative on the grid")
        return r

    def alpha_norm(self, t, alpha):
        t = np.asarray(t, dtype=float)
        return self.rho(t) ** alpha * t

    def evaluate(self, t, s, alpha):
        return self.rho(t) * (s <= t)

    def l2_cov(self, t1, t2, alpha):
        return float(self.rho(t1) * self.rho(t2)) * min(t1, t2)


@dataclass(frozen=True)
class Sheet:
    d: int = 2

    def check(self, alpha):
        check_alpha(alpha)
        if self.d < 1:
            raise ValueError("sheet dimension must be >= 1")

    def alpha_norm(self, t, alpha):
        return np.prod(np.asarray(t, dtype=float), axis=-1)

    def evaluate(self, t, s, alpha):
        t = np.asarray(t, dtype=float)
        return np.all(np.asarray(s).reshape(-1, self.d) <= t, axis=-1).astype(float)

    def l2_cov(self, t1, t2, alpha):
        return float(np.prod(np.minimum(t1, t2)))


KernelSpec = LevyMotion | RiemannLiouville | WeightedLevy | Sheet


def grid_points(G):
    """Right endpoints i/G, i = 1..G."""
    if G < 1:
        raise ValueError("grid size must be >= 1")
    return np.arange(1, G + 1, dtype=float) / G

# ---------------------------------------------------------------- norms


@dataclass(frozen=True)
class Lq:
    q: float

    def __post_init__(self):
        if not 1.0 <= self.q < math.inf:
            raise ValueError("Lq needs 1 <= q < inf")


@dataclass(frozen=True)
class Sup:
    q = math.inf


@dataclass(frozen=True)
class BlockL1LinfPow2:
    levels: int

    @property
    def width(self):
        return (1 << (self.levels + 1)) - 2


NormSpec = Lq | Sup | BlockL1LinfPow2


@dataclass
class PathSample:
    grid: np.ndarray            # 1-d axis points (shared by every axis of a lattice)
    values: np.ndarray
    weights: np.ndarray | None = None   # quadrature weight per value; None -> cell measure
    flags: dict = field(default_factory=dict)

    def __post_init__(self):
        g = np.asarray(self.grid)
        if g.ndim != 1 or np.any(np.diff(g) <= 0):
            raise ValueError("grid must be strictly increasing")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("path values must be finite")

    def quadrature_weights(self):
        if self.weights is not None:
            return np.broadcast_to(self.weights, self.values.shape).ravel()
        cell = 1.0 / self.grid.size ** self.values.ndim
        return np.full(self.values.size, cell)


def norm(path: PathSample, spec) -> float:
    v = np.asarray(path.values, dtype=float)
    if isinstance(spec, Sup):
        return float(np.max(np.abs(v)))
    if isinstance(spec, Lq):
        w = path.quadrature_weights()
        return float(kernels.rows_norm(v.reshape(1, -1), w, spec.q)[0])
    if isinstance(spec, BlockL1LinfPow2):
        if v.ndim != 1 or v.size != spec.width:
            raise ValueError(
                f"block structure mismatch: {spec.levels} levels need {spec.width} values, got {v.size}")
        a = np.abs(v)
        return float(sum(a[(1 << n) - 2:(1 << (n + 1)) - 2].max() for n in range(1, spec.levels + 1)))
    raise TypeError(f"unknown norm spec {spec!r}")


def _q_of(spec):
    if isinstance(spec, Sup):
        return math.inf
    if isinstance(spec, Lq):
        return float(spec.q)
    raise ValueError(f"{type(spec).__name__} does not apply to function paths")

# ---------------------------------------------------------------- increment sampler

_BLOCK_CELLS = 1 << 21


class IncrementSampler:
    """Exact-marginal grid sampler for a kernel at a fixed alpha."""

    def __init__(self, kernel, alpha, G):
        kernel.check(alpha)
        self.kernel = kernel
        self.alpha = check_alpha(alpha)
        self.G = int(G)
        self.grid = grid_points(self.G)
        d = getattr(kernel, "d", 1)
        self.cells = self.G ** d
        if self.cells > 1 << 26:
            raise BudgetError(f"lattice with {self.cells} cells exceeds the memory cap")
        self.block_size = max(1, _BLOCK_CELLS // self.cells)
        self._scale = self.G ** (-d / self.alpha)
        if isinstance(kernel, RiemannLiouville):
            self._filter_fft = scipy.fft.rfft(kernel.cell_filter(self.G, self.alpha), 2 * self.G)
        if isinstance(kernel, WeightedLevy):
            self._rho = kernel.rho(self.grid)

    def _levy_like(self):
        k = self.kernel
        return isinstance(k, (LevyMotion, WeightedLevy)) or (isinstance(k, Sheet) and k.d == 1)

    def _noise(self, n, gen):
        d = getattr(self.kernel, "d", 1)
        return sas_array(self.alpha, gen, (n,) + (self.G,) * d)

    def paths(self, n, gen):
        """Array of n paths, shape (n, G) or (n, G, ..., G) for a sheet."""
        xi = self._noise(n, gen)
        k = self.kernel
        if isinstance(k, RiemannLiouville):
            spec = scipy.fft.rfft(xi, 2 * self.G, axis=1)
            return scipy.fft.irfft(spec * self._filter_fft, 2 * self.G, axis=1)[:, :self.G]
        x = xi * self._scale
        for ax in range(1, x.ndim):
            np.cumsum(x, axis=ax, out=x)
        if isinstance(k, WeightedLevy):
            x *= self._rho
        return x

    def norms(self, n, gen, spec):
        q = _q_of(spec)
        w = np.full(self.cells, 1.0 / self.cells)
        if self._levy_like():
            incr = self._noise(n, gen).reshape(n, self.G) * self._scale
            rho = self._rho if isinstance(self.kernel, WeightedLevy) else None
            return kernels.cumsum_norm(incr, rho, w, q)
        return kernels.rows_norm(self.paths(n, gen).reshape(n, -1), w, q)

    def sample(self, rng) -> PathSample:
        return PathSample(self.grid, self.paths(1, as_generator(rng))[0])


def sample_path_increments(kernel, alpha, grid, rng) -> PathSample:
    """One path on the uniform grid with ``grid`` points per axis."""
    return IncrementSampler(kernel, alpha, grid).sample(rng)

# ---------------------------------------------------------------- LePage sampler


def _sites_for(kernel):
    return UnitCube(getattr(kernel, "d", 1))


class LePageSampler:
    """Truncated LePage series at a few fixed times.

    With ``compensate`` the terms j > J are replaced by a Gaussian vector with
    the same conditional covariance in mean (needs K(t, .) square integrable).
    """

    def __init__(self, kernel, alpha, times, J=None, compensate=True):
        alpha = check_alpha(alpha, gaussian_ok=False)
        kernel.check(alpha)
        self.kernel, self.alpha = kernel, alpha
        self.times = np.atleast_1d(np.asarray(times, dtype=float))
        if getattr(kernel, "d", 1) > 1:
            self.times = self.times.reshape(-1, kernel.d)
        self.J = default_truncation(alpha) if J is None else int(J)
        self.j_min = lepage_j_min(alpha)
        self.kappa = lepage_scale(alpha)
        ok_l2 = getattr(kernel, "l2_ok", lambda a: True)(alpha)
        self.compensate = bool(compensate and ok_l2)
        self._chol = None
        if self.compensate:
            m = len(self.times)
            cov = np.array([[kernel.l2_cov(self.times[i], self.times[j], alpha) for j in range(m)]
                            for i in range(m)])
            r2 = lepage_tail_variance(alpha, self.J)
            vals, vecs = np.linalg.eigh(cov * r2)
            self._chol = vecs * np.sqrt(np.clip(vals, 0.0, None))
        self.block_size = max(1, (1 << 20) // max(self.J, 1))

    @property
    def flags(self):
        return {"truncation": self.J, "j_min": self.j_min, "below_j_min": self.J < self.j_min,
                "remainder_compensated": self.compensate}

    def _values(self, stream, xi, gen):
        g = stream.gammas ** (-1.0 / self.alpha) * xi
        out = np.array([g @ self.kernel.evaluate(t, stream.sites, self.alpha) for t in self.times])
        out *= self.kappa
        if self._chol is not None:
            out += self.kappa * (self._chol @ gen.standard_normal(self._chol.shape[1]))
        return out

    def paths(self, n, gen):
        """n independent paths at ``times``, drawn in chunks of whole paths."""
        out = np.empty((n, len(self.times)))
        d = getattr(self.kernel, "d", 1)
        chunk = max(1, (1 << 20) // self.J)
        for lo in range(0, n, chunk):
            b = min(chunk, n - lo)
            g = np.cumsum(gen.standard_exponential((b, self.J)), axis=1)
            sites = gen.random((b, self.J) if d == 1 else (b, self.J, d))
            coef = g ** (-1.0 / self.alpha) * gen.standard_normal((b, self.J))
            for i, t in enumerate(self.times):
                k = self.kernel.evaluate(t, sites, self.alpha).reshape(b, self.J)
                out[lo:lo + b, i] = np.einsum("ij,ij->i", coef, k)
            out[lo:lo + b] *= self.kappa
            if self._chol is not None:
                z = gen.standard_normal((b, self._chol.shape[1]))
                out[lo:lo + b] += self.kappa * (z @ self._chol.T)
        return out

    def sample(self, stream: LePageStream, rng) -> PathSample:
        gen = as_generator(rng)
        vals = self._values(stream, gen.standard_normal(stream.truncation), gen)
        grid = self.times if self.times.ndim == 1 else np.unique(self.times)
        return PathSample(np.atleast_1d(grid), vals, weights=np.full(vals.size, 1.0 / vals.size),
                          flags=self.flags)


def sample_path_lepage(kernel, alpha, stream, grid, rng, compensate=True) -> PathSample:
    """LePage path at the points ``grid`` driven by ``stream``."""
    sampler = LePageSampler(kernel, alpha, grid, J=stream.truncation, compensate=compensate)
    return sampler.sample(stream, rng)

# ---------------------------------------------------------------- sum of maxima


@dataclass(frozen=True)
class PowerLog:
    """theta_n = 2^{-n/gamma} n^{-beta/gamma}."""

    gamma: float
    beta: float = 0.0

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if self.beta < 0:
            raise ValueError("beta must be nonnegative so that theta_n decreases")

    def values(self, n_max):
        n = np.arange(1, n_max + 1, dtype=float)
        return 2.0 ** (-n / self.gamma) * n ** (-self.beta / self.gamma)

    def weighted_tail(self, m, alpha):
        """sum_{n>m} theta_n 2^{n/alpha} (inf when divergent)."""
        e = 1.0 / alpha - 1.0 / self.gamma
        if e > 0:
            return math.inf
        s = self.beta / self.gamma
        if e == 0:
            return float(special.zeta(s, m + 1)) if s > 1 else math.inf
        n = np.arange(m + 1, m + 4001, dtype=float)
        terms = 2.0 ** (n * e) * n ** (-s)
        return math.fsum(terms) + terms[-1] * 2.0 ** e / (1 - 2.0 ** e)


@dataclass(frozen=True)
class PowerTheta:
    """theta_n = n^{-a}."""

    a: float

    def values(self, n_max):
        return np.arange(1, n_max + 1, dtype=float) ** (-self.a)

    def alpha_tail(self, m, alpha):
        """sum_{n>m} theta_n^alpha."""
        s = self.a * alpha
        return float(special.zeta(s, m + 1)) if s > 1 else math.inf

    def weighted_tail(self, m, alpha):
        return math.inf


@dataclass(frozen=True)
class ExplicitTheta:
    seq: tuple

    def __post_init__(self):
        v = np.asarray(self.seq, dtype=float)
        if np.any(v < 0) or np.any(np.diff(v) > 0):
            raise ValueError("theta must be nonnegative and nonincreasing")

    def values(self, n_max):
        v = np.zeros(n_max)
        k = min(n_max, len(self.seq))
        v[:k] = self.seq[:k]
        return v

    def weighted_tail(self, m, alpha):
        return math.fsum(t * 2.0 ** ((n + 1) / alpha) for n, t in enumerate(self.seq) if n + 1 > m)

    def alpha_tail(self, m, alpha):
        return math.fsum(t ** alpha for t in self.seq[m:])


ThetaSeq = PowerLog | PowerTheta | ExplicitTheta

_MAX_WIDTH = 1 << 24


def _tail_series(alpha, k):
    # coefficient of x^{-k alpha} in P(X > x) for standard SαS
    return ((-1) ** (k + 1) * math.gamma(k * alpha) / math.factorial(k)
            * math.sin(k * math.pi * alpha / 2) / math.pi)


class SumOfMaxima:
    """Norm of (theta_n xi_{n,l}) in l1(l_inf^{2^n}) summed over n <= levels.

    ``tail='frechet'`` adds levels beyond ``levels`` using the Fréchet limit of
    the block maximum (one uniform per level). ``certificate`` bounds the
    remaining bias at the scale of a median.
    """

    def __init__(self, theta, levels, alpha, tail="none", memory_cap=_MAX_WIDTH, extra_depth=4096):
        self.alpha = check_alpha(alpha)
        self.theta_seq = theta
        self.levels = int(levels)
        if self.levels < 1:
            raise ValueError("levels must be >= 1")
        self.width = (1 << (self.levels + 1)) - 2
        if self.levels > 60 or self.width > memory_cap:
            raise BudgetError(f"{self.levels} levels need {self.width} variates per sample; cap is {memory_cap}")
        if tail not in ("none", "frechet"):
            raise ValueError("tail must be 'none' or 'frechet'")
        if tail == "frechet" and self.alpha == 2.0:
            raise ValueError("Fréchet tail levels need alpha < 2")
        self.tail = tail
        self.theta = theta.values(self.levels)
        self.block_size = max(1, (1 << 22) // self.width)
        self.depth = self.levels
        if self.alpha == 2.0:
            n = np.arange(self.levels + 1, self.levels + 4001, dtype=float)
            t = theta.values(self.levels + 4000)[self.levels:]
            self.certificate = math.fsum(t * np.sqrt(4.0 * n * math.log(2.0)))
            return
        c1 = tail_constant(self.alpha)
        self._q0 = (2.0 * c1 / math.log(2.0)) ** (1.0 / self.alpha)
        full = self._q0 * theta.weighted_tail(self.levels, self.alpha)
        if tail == "none" or not math.isfinite(full) or full == 0:
            self.certificate = full
            return
        depth = self.levels
        while depth < self.levels + extra_depth:
            depth += 1
            if self._q0 * theta.weighted_tail(depth, self.alpha) <= 1e-3 * full:
                break
        self.depth = depth
        self.tail_theta = theta.values(depth)[self.levels:]
        n = np.arange(self.levels + 1, depth + 1, dtype=float)
        med = self._q0 * 2.0 ** (n / self.alpha)
        ratio = sum(abs(_tail_series(self.alpha, k) / c1) * med ** (-(k - 1) * self.alpha)
                    for k in (2, 3))
        approx_err = math.fsum(self.tail_theta * med * 2.0 * ratio / self.alpha)
        self.certificate = self._q0 * theta.weighted_tail(depth, self.alpha) + approx_err

    def _frechet(self, n, gen):
        c1 = tail_constant(self.alpha)
        k = self.depth - self.levels
        lev = np.arange(self.levels + 1, self.depth + 1, dtype=float)
        u = gen.random((n, k))
        p = -np.expm1(np.log(u) * 2.0 ** (-lev))
        return ((2.0 * c1 / p) ** (1.0 / self.alpha)) @ self.tail_theta

    def norms(self, n, gen, spec=None):
        if spec is not None and not (isinstance(spec, BlockL1LinfPow2) and spec.levels == self.levels):
            raise ValueError("sum-of-maxima samples need BlockL1LinfPow2 with matching levels")
        if self.alpha == 2.0:
            w = np.sqrt(2.0) * gen.standard_normal((n, self.width))
            out = np.zeros(n)
            a = np.abs(w)
            for lev in range(1, self.levels + 1):
                lo = (1 << lev) - 2
                out += self.theta[lev - 1] * a[:, lo:lo + (1 << lev)].max(axis=1)
            return out
        u = gen.random((n, self.width))
        w = None if self.alpha == 1.0 else gen.standard_exponential((n, self.width))
        out = kernels.block_max_sum(u, w, self.alpha, self.theta)
        if self.depth > self.levels:
            out += self._frechet(n, gen)
        return out

    def vector(self, rng):
        """The random vector (theta_n xi_{n,l}) in block layout."""
        gen = as_generator(rng)
        scale = np.repeat(self.theta, [1 << n for n in range(1, self.levels + 1)])
        return scale * sas_array(self.alpha, gen, self.width)


def sum_of_maxima_sample(theta, levels, alpha, rng, tail="none") -> float:
    s = SumOfMaxima(theta, levels, alpha, tail=tail)
    return float(s.norms(1, as_generator(rng))[0])

# ---------------------------------------------------------------- diagonal vectors


class DiagonalSAS:
    """X = (theta_n xi_n)_{n <= N}, with l_q norm over the coordinates."""

    def __init__(self, theta, N, alpha):
        self.alpha = check_alpha(alpha)
        self.theta_seq = theta
        self.N = int(N)
        self.theta = theta.values(self.N)
        self.block_size = max(1, (1 << 21) // self.N)
        tail = theta.alpha_tail(self.N, self.alpha) if hasattr(theta, "alpha_tail") else math.inf
        # level at which the union bound on the dropped coordinates reaches 1/2
        if self.alpha < 2.0:
            self.certificate = (4.0 * tail_constant(self.alpha) * tail) ** (1.0 / self.alpha)
        else:
            self.certificate = math.inf

    def norms(self, n, gen, spec):
        q = _q_of(spec)
        x = sas_array(self.alpha, gen, (n, self.N)) * self.theta
        return kernels.rows_norm(x, np.ones(self.N), q)
