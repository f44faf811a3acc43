"""Measures on the integers, the random diagonal they induce through a LePage
partition, distinct-value counts, entropy surrogates and the entropy gap."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate

from .measures import MeasureOnN
from .rng import as_generator, as_spec
from .smalldev import RateFit, weighted_loglog
from .stable import check_alpha

_X_LAST = 2.0 ** 61         # largest site index represented in a tail table
_SINGLETON_BASE = 1 << 62   # ids for draws beyond _X_LAST


def _log2(k):
    return np.log(np.asarray(k, dtype=float) + 2.0)


class TabulatedMeasure(MeasureOnN):
    """MeasureOnN whose tail beyond k_max is tabulated as T(x) = sigma([x, inf)).

    Tail draws are inverted through the table, so sites beyond the horizon can
    repeat. Mass beyond the last tabulated site becomes distinct singletons.
    """

    def __init__(self, weights, tail_x, tail_T, name=""):
        tail_T = np.asarray(tail_T, dtype=float)
        super().__init__(weights, tail_mass=float(tail_T[0]), name=name)
        scale = self.tail_mass / tail_T[0] if tail_T[0] > 0 else 0.0
        self.tail_x = np.asarray(tail_x, dtype=float)
        self.tail_T = tail_T * scale

    @property
    def beyond_mass(self):
        """Mass of sites past the last tabulated index (sampled as singletons)."""
        return float(self.tail_T[-1])

    def sample(self, J, gen):
        u = gen.random(J)
        idx = np.searchsorted(self.cdf, u, side="right")
        sites = idx.astype(np.int64) + 1
        beyond = idx >= self.k_max
        if not beyond.any():
            return sites
        r = np.maximum(1.0 - u[beyond], 1e-300)
        # extra mass from rounding (cdf[-1] + tail may differ from 1 by ulps)
        r = np.minimum(r, self.tail_mass)
        out = np.empty(r.size, dtype=np.int64)
        far = r <= self.tail_T[-1]
        logx = np.interp(-np.log(r[~far]), -np.log(self.tail_T), np.log(self.tail_x))
        out[~far] = np.maximum(np.floor(np.exp(logx)).astype(np.int64), self.k_max + 1)
        out[far] = _SINGLETON_BASE + np.arange(int(far.sum()))
        sites[beyond] = out
        return sites


def _tail_table(f_y, y0, remainder, n=20001):
    """T on x = e^y + 1/2 for y in [y0, log X_LAST] from the density f_y in y."""
    y = np.linspace(y0, math.log(_X_LAST), n)
    fy = f_y(y)
    seg = 0.5 * (fy[1:] + fy[:-1]) * np.diff(y)
    T = np.append(np.cumsum(seg[::-1])[::-1], 0.0) + remainder
    return np.exp(y) + 0.5, T


def measure_case(case, params, alpha, K_max=10**6):
    """Case (a): sigma_k ~ 1/(k log^nu k), nu > 1. Case (b): sigma_k ~ k^-a log^-nu k, a > 1.

    ``alpha`` only validates the index; the measure itself does not depend on it.
    """
    check_alpha(alpha, gaussian_ok=False)
    K = int(K_max)
    if K < 1:
        raise ValueError("K_max must be >= 1")
    k = np.arange(1, K + 1, dtype=float)
    Y = math.log(_X_LAST)
    if case == "a":
        nu = float(params.get("nu", 2.0))
        if not nu > 1:
            raise ValueError(f"case (a) needs nu > 1 (series diverges otherwise), got nu={nu}")
        w = 1.0 / (k * _log2(k) ** nu)
        f_y = lambda y: np.log(np.exp(y) + 2.0) ** -nu
        rem = Y ** (1.0 - nu) / (nu - 1.0)
        name = f"case a, nu={nu:g}"
    elif case == "b":
        a = float(params.get("a", 2.0))
        nu = float(params.get("nu", 0.0))
        if not a > 1:
            raise ValueError(f"case (b) needs a > 1, got a={a}")
        w = k ** -a * _log2(k) ** -nu
        f_y = lambda y: np.exp((1.0 - a) * y) * np.log(np.exp(y) + 2.0) ** -nu
        rem = math.exp((1.0 - a) * Y) * Y ** -nu / (a - 1.0)
        name = f"case b, a={a:g}, nu={nu:g}"
    else:
        raise ValueError(f"case must be 'a' or 'b', got {case!r}")
    x, T = _tail_table(f_y, math.log(K + 0.5), rem)
    total = math.fsum(w) + T[0]
    return TabulatedMeasure(w / total, x, T / total, name=name)

# ---------------------------------------------------------------- gap targets


@dataclass(frozen=True)
class LogPower:
    """d_k = (log(k + 2))^power."""

    power: float

    def __call__(self, k):
        return _log2(k) ** self.power


@dataclass(frozen=True)
class GapTargetSpec:
    d: Callable
    name: str = ""

    def d_values(self, K):
        return np.asarray(self.d(np.arange(1, K + 1, dtype=float)), dtype=float)

    def a_values(self, K, alpha):
        k = np.arange(1, K + 1, dtype=float)
        return self.d_values(K) ** (-alpha) / k

    def diagnostics(self, alpha, K):
        """Numeric versions of the monotonicity, doubling, floor and divergence conditions."""
        d = self.d_values(K)
        half = d[: K // 2]
        doubling = d[1::2][: half.size] / half
        floor = d / _log2(np.arange(1, K + 1)) ** (1.0 / (2 * alpha))
        A = np.cumsum(self.a_values(K, alpha))
        r2, r4 = int(math.isqrt(K)), max(1, int(round(K ** 0.25)))
        growth = (A[K - 1] - A[r2 - 1]) / max(A[r2 - 1] - A[r4 - 1], 1e-300)
        return {
            "increasing": bool(np.all(np.diff(d) >= 0)),
            "doubling_min": float(doubling.min()), "doubling_max": float(doubling.max()),
            "floor_ratio": float(floor[-1] / floor.max()),
            "growth_ratio": float(growth),
        }


FLOOR_MIN = 0.5
GROWTH_MIN = 0.9


def _check_target(target, alpha, K, need_divergent=True):
    diag = target.diagnostics(alpha, K)
    if not diag["increasing"]:
        raise ValueError(f"d must be nondecreasing on the horizon ({target.name})")
    if not (0.25 <= diag["doubling_min"] and diag["doubling_max"] <= 4.0):
        raise ValueError(f"d fails the doubling check: d_2n/d_n in "
                         f"[{diag['doubling_min']:.3g}, {diag['doubling_max']:.3g}]")
    if need_divergent:
        if diag["floor_ratio"] < FLOOR_MIN:
            raise ValueError(f"d falls below the (log k)^(1/(2 alpha)) floor: ratio {diag['floor_ratio']:.3g}")
        if diag["growth_ratio"] < GROWTH_MIN:
            raise ValueError(f"sum d_k^-alpha / k looks convergent (growth ratio {diag['growth_ratio']:.3g})")
    elif diag["growth_ratio"] >= GROWTH_MIN:
        raise ValueError(f"sum d_k^-alpha / k looks divergent (growth ratio {diag['growth_ratio']:.3g})")
    return diag


def measure_from_gap_target(target: GapTargetSpec, alpha, K_max=10**6):
    """sigma_k = c a_{k+1} exp(-A_k) with a_k = d_k^-alpha / k."""
    alpha = check_alpha(alpha, gaussian_ok=False)
    K = int(K_max)
    _check_target(target, alpha, K)
    a = target.a_values(K + 1, alpha)
    A = np.cumsum(a)
    w = a[1:] * np.exp(-A[:K])
    if np.any(np.diff(w) > 0):
        raise ValueError("constructed weights are not monotone")
    # T(x) ~ exp(-A(x)); A continued past K by integrating d(e^y)^-alpha dy
    y0 = math.log(K + 1.5)
    y = np.linspace(y0, math.log(_X_LAST), 20001)
    fy = np.asarray(target.d(np.exp(y)), dtype=float) ** -alpha
    Ay = A[K] + np.append(0.0, np.cumsum(0.5 * (fy[1:] + fy[:-1]) * np.diff(y)))
    T = np.exp(-Ay)
    x = np.exp(y) - 0.5
    total = math.fsum(w) + T[0]
    return TabulatedMeasure(w / total, x, T / total, name=target.name or "gap target")

# ---------------------------------------------------------------- random diagonal


@dataclass
class RandomDiagonal:
    sites: np.ndarray          # occupied site ids, ascending
    lam: np.ndarray            # lambda per occupied site
    lambda_star: np.ndarray    # decreasing rearrangement
    star_sites: np.ndarray     # site id of each lambda_star entry
    first_hits: np.ndarray     # sorted first-hit indices j (1-based)
    J: int
    alpha: float
    tail_draws: int = 0        # draws that landed past k_max
    meta: dict = field(default_factory=dict)

    def N(self, m):
        """Number of distinct sites among V_1..V_m."""
        return np.searchsorted(self.first_hits, np.asarray(m), side="right")

    @property
    def resolved(self):
        """Ranks with a nonzero lambda*: n <= N_J."""
        return int(self.first_hits.size)

    @property
    def well_resolved(self):
        """N_(J/4): a stricter, advisory bound on ranks unaffected by truncation."""
        return int(self.N(self.J // 4))

    @property
    def mass(self):
        return math.fsum(self.lam ** 2)


def random_diagonal(measure, J, alpha, rng, min_J=1000):
    alpha = check_alpha(alpha, gaussian_ok=False)
    J = int(J)
    if J < min_J:
        raise ValueError(f"J must be >= {min_J}")
    gen = as_generator(rng)
    v = measure.sample(J, gen)
    sites, inv = np.unique(v, return_inverse=True)
    j = np.arange(1, J + 1, dtype=float)
    lam = np.sqrt(np.bincount(inv, weights=j ** (-2.0 / alpha), minlength=sites.size))
    first = np.full(sites.size, J + 1, dtype=np.int64)
    np.minimum.at(first, inv, np.arange(1, J + 1))
    order = np.lexsort((sites, -lam))   # descending lambda, ties by ascending site
    k_max = getattr(measure, "k_max", np.inf)
    return RandomDiagonal(sites, lam, lam[order], sites[order], np.sort(first), J, alpha,
                          tail_draws=int(np.sum(v > k_max)))


def lepage_mass(J, alpha):
    return math.fsum(np.arange(1, J + 1, dtype=float) ** (-2.0 / alpha))

# ---------------------------------------------------------------- distinct counts


@dataclass(frozen=True)
class ExpectedDistinct:
    value: float
    tail_bound: float    # |true - value| <= tail_bound

    def __float__(self):
        return self.value


def expected_distinct(measure, m) -> ExpectedDistinct:
    """E N_m = sum_k 1 - (1 - sigma_k)^m; the tail past k_max is linearized."""
    if m < 1:
        raise ValueError("m must be >= 1")
    s = measure.weights
    with np.errstate(divide="ignore"):
        head = math.fsum(-np.expm1(m * np.log1p(-np.minimum(s, 1.0))))
    tail = measure.tail_mass
    if tail == 0:
        return ExpectedDistinct(head, 0.0)
    # 1 - (1-x)^m lies in [m x - (m x)^2 / 2, m x] and sigma_k <= sigma_{k_max} past the horizon
    bound = 0.5 * m * m * float(s[-1]) * tail
    return ExpectedDistinct(head + m * tail, bound)


def distinct_count_mc(measure, m, replications, rng, workers=1, budget=5 * 10**8):
    """Replicates of N_m; replication r uses substream child(r)."""
    if m * replications > budget:
        from .errors import BudgetError
        raise BudgetError(f"m * replications = {m * replications} exceeds {budget}")
    spec = as_spec(rng)

    def one(r):
        return np.unique(measure.sample(m, spec.child(r).generator())).size

    if workers <= 1:
        return np.array([one(r) for r in range(replications)], dtype=np.int64)
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return np.array(list(ex.map(one, range(replications))), dtype=np.int64)

# ---------------------------------------------------------------- surrogates


@dataclass(frozen=True)
class DiagonalSpec:
    theta: object          # ThetaSeq or explicit array of theta_1, theta_2, ...
    p: float = 2.0
    q: float = 1.0

    def values(self, n_max):
        t = self.theta
        if hasattr(t, "values"):
            return np.asarray(t.values(n_max), dtype=float)
        t = np.asarray(t, dtype=float)
        if t.size < n_max:
            raise ValueError(f"explicit theta has {t.size} entries, need {n_max}")
        return t[:n_max]

    @classmethod
    def from_measure(cls, measure, alpha, p=2.0):
        """theta_n = sigma_n^(1/alpha), target exponent alpha."""
        return cls(measure.weights ** (1.0 / alpha), p=p, q=alpha)


@dataclass
class EntropyCurve:
    n: np.ndarray
    e: np.ndarray


REGULARITY_SLACK = 0.05
REGULARITY_MAX = 1e3


def kuhn_entropy(spec: DiagonalSpec, q=None, n_grid=None) -> EntropyCurve:
    """Surrogate e_n = theta_n n^(1/q - 1/p), constants set to 1."""
    q = spec.q if q is None else float(q)
    n_grid = np.asarray(n_grid, dtype=np.int64)
    N = int(n_grid.max())
    th = spec.values(N)
    if np.any(th <= 0):
        raise ValueError("theta must be positive on the grid")
    if not (th[-1] <= 0.5 * th[0] and th[-1] < th[(N - 1) // 2]):
        raise ValueError("theta does not tend to 0 on the grid (operator not compact)")
    a = max(1.0 / q - 1.0 / spec.p, 0.0) + REGULARITY_SLACK
    g = np.log(th) + a * np.log(np.arange(1, N + 1))
    sup = float(np.max(np.maximum.accumulate(g[::-1])[::-1] - g))
    if sup > math.log(REGULARITY_MAX):
        raise ValueError(f"theta fails the regularity check: sup (n/k)^a theta_n/theta_k = {math.exp(sup):.3g} "
                         f"with a = {a:.3g}")
    return EntropyCurve(n_grid, th[n_grid - 1] * n_grid ** (1.0 / q - 1.0 / spec.p))


def _a_tail(target, alpha, y0, y1=700.0):
    """int_{y0}^inf d(e^y)^-alpha dy, with a power-law continuation past y1."""
    f = lambda y: float(np.asarray(target.d(math.exp(y)), dtype=float)) ** -alpha
    head, _ = integrate.quad(f, y0, y1, limit=400)
    s = math.log(f(y1 / 2) / f(y1)) / math.log(2.0)
    if s <= 1:
        raise ValueError("sum d_k^-alpha / k diverges")
    return head + f(y1) * y1 / (s - 1.0)


@dataclass
class IntervalAllocation:
    n: np.ndarray
    sizes: np.ndarray
    e_u: np.ndarray
    e_u_inf: np.ndarray
    gap_bound: np.ndarray
    c: float


def interval_allocation(target: GapTargetSpec, alpha, p, n_grid, theta=None, K=10**6):
    """Disjoint intervals |A_n| = c d_n^-alpha / n with sum |A_n| = 1."""
    alpha = check_alpha(alpha, gaussian_ok=False)
    _check_target(target, alpha, K, need_divergent=False)
    head = math.fsum(target.a_values(K, alpha))
    tail = _a_tail(target, alpha, math.log(K + 0.5))
    c = 1.0 / (head + tail)
    n = np.asarray(n_grid, dtype=np.int64)
    d = np.asarray(target.d(n.astype(float)), dtype=float)
    sizes = c * d ** -alpha / n
    if theta is None:
        from .processes import PowerTheta
        theta = PowerTheta(1.0 / alpha + 1.0)
    th = np.asarray(theta.values(int(n.max())), dtype=float)[n - 1]
    e_u = th * n ** (1.0 / alpha - 1.0 / p)
    e_u_inf = th * sizes ** (-1.0 / alpha) * n ** (-1.0 / p)
    gap = sizes ** (-1.0 / alpha) / n ** (1.0 / alpha)
    return IntervalAllocation(n, sizes, e_u, e_u_inf, gap, c)


@dataclass
class GapCurve:
    n: np.ndarray
    G: np.ndarray
    e_v: np.ndarray
    e_u: np.ndarray


def gap_curve(theta: DiagonalSpec, diag: RandomDiagonal, alpha, n_grid) -> GapCurve:
    """G_n = e_n(v) / (n^(1/2 - 1/alpha) e_n(u)) with
    e_n(v) = lambda*_n n^(1/2 - 1/p) and e_n(u) = theta_n n^(1/alpha - 1/p)."""
    n = np.asarray(n_grid, dtype=np.int64)
    if n.min() < 1:
        raise ValueError("n must be >= 1")
    if n.max() > diag.resolved:
        raise ValueError(f"n = {int(n.max())} is beyond the resolved range (N_J = {diag.resolved})")
    th = theta.values(int(n.max()))[n - 1]
    lam = diag.lambda_star[n - 1]
    nf = n.astype(float)
    e_v = lam * nf ** (0.5 - 1.0 / theta.p)
    e_u = th * nf ** (1.0 / alpha - 1.0 / theta.p)
    G = e_v / (nf ** (0.5 - 1.0 / alpha) * e_u)
    return GapCurve(n, G, e_v, e_u)


def fit_rearrangement(diag, k_range, with_log_factor=False) -> RateFit:
    """Least squares of log lambda*_k on log k (and log log k) over integer k in k_range."""
    lam = diag.lambda_star if isinstance(diag, RandomDiagonal) else np.asarray(diag, dtype=float)
    lo, hi = int(k_range[0]), int(k_range[1])
    if lo < 1 or hi > lam.size:
        raise ValueError(f"k range [{lo}, {hi}] outside the {lam.size} available values")
    if isinstance(diag, RandomDiagonal) and hi > diag.resolved:
        raise ValueError(f"k range ends past the resolved range {diag.resolved}")
    if with_log_factor and lo < 3:
        raise ValueError("log factor fit needs k >= 3")
    k = np.arange(lo, hi + 1, dtype=float)
    if k.size < 4:
        raise ValueError("need at least 4 points")
    y = lam[lo - 1:hi]
    if np.any(y <= 0):
        raise ValueError("lambda* must be positive on the fitted range")
    x = np.log(k)
    coef, half, rms = weighted_loglog(x, np.log(y), np.ones_like(x), np.log(x) if with_log_factor else None)
    theta = float(coef[2]) if with_log_factor else 0.0
    th_ci = (theta - float(half[2]), theta + float(half[2])) if with_log_factor else (0.0, 0.0)
    return RateFit(float(coef[1]), theta, float(coef[0]), rms,
                   (float(coef[1] - half[1]), float(coef[1] + half[1])), int(k.size), th_ci)
