"""Monte Carlo small deviation function phi(eps) = -log P(||X|| < eps) and
log-log rate regression."""
from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .rng import as_spec


@dataclass(frozen=True)
class ConstantSampler:
    """Degenerate sampler whose norm is always ``value``."""

    value: float = 0.0
    block_size: int = 1 << 16

    def norms(self, n, gen, spec=None):
        return np.full(n, float(self.value))


@dataclass(frozen=True)
class ScalarSampler:
    """|Y| for a scalar drawn by ``draw(gen, n)``."""

    draw: object
    block_size: int = 1 << 16

    def norms(self, n, gen, spec=None):
        return np.abs(self.draw(gen, n))


def sample_norms(sampler, norm, n_samples, rng, workers=1):
    """Norms of ``n_samples`` independent paths, in trial order.

    Trials are grouped in blocks of ``sampler.block_size``; block b uses
    substream ``rng.child(b)``. The output does not depend on ``workers``.
    """
    spec = as_spec(rng)
    n_samples = int(n_samples)
    bs = int(getattr(sampler, "block_size", 4096))
    starts = list(range(0, n_samples, bs))

    def run(b):
        n = min(bs, n_samples - starts[b])
        return sampler.norms(n, spec.child(b).generator(), norm)

    if workers <= 1 or len(starts) == 1:
        parts = [run(b) for b in range(len(starts))]
    else:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(run, range(len(starts))))
    return np.concatenate(parts) if parts else np.empty(0)


@dataclass
class SmallDevCurve:
    eps: np.ndarray
    hits: np.ndarray
    n_samples: int
    neg_log_p: np.ndarray
    stderr: np.ndarray
    censored: np.ndarray
    meta: dict = field(default_factory=dict)

    @classmethod
    def from_counts(cls, eps, hits, n_samples, meta=None):
        eps = np.asarray(eps, dtype=float)
        hits = np.asarray(hits, dtype=np.int64)
        n = int(n_samples)
        censored = hits == 0
        p = np.where(censored, 1.0, hits / n)
        with np.errstate(divide="ignore"):
            nlp = np.where(censored, np.nan, -np.log(p))
            # delta method: sd(log p_hat) = sqrt((1-p)/(n p)) = sqrt((1-p)/hits)
            se = np.where(censored, np.nan, np.sqrt((1.0 - p) / np.maximum(hits, 1)))
        nlp = np.where(nlp == 0.0, 0.0, nlp)  # no negative zeros in output
        return cls(eps, hits, n, nlp, se, censored, dict(meta or {}))

    @classmethod
    def from_norms(cls, norms, eps, meta=None):
        eps = np.asarray(eps, dtype=float)
        if eps.ndim != 1 or eps.size == 0 or np.any(eps <= 0) or np.any(np.diff(eps) >= 0):
            raise ValueError("eps grid must be positive and strictly decreasing")
        srt = np.sort(np.asarray(norms, dtype=float))
        hits = np.searchsorted(srt, eps, side="left")  # count of norms < eps
        return cls.from_counts(eps, hits, srt.size, meta)

    @classmethod
    def synthetic(cls, eps, phi, stderr=None):
        """Curve with prescribed phi values, used to test the fit."""
        eps = np.asarray(eps, dtype=float)
        phi = np.asarray(phi, dtype=float)
        se = np.zeros_like(phi) if stderr is None else np.asarray(stderr, dtype=float)
        z = np.zeros(eps.size, dtype=np.int64)
        return cls(eps, z, 0, phi, se, np.zeros(eps.size, dtype=bool))

    @property
    def usable(self):
        """Points usable for fitting: uncensored and with phi > 0."""
        return ~self.censored & (np.nan_to_num(self.neg_log_p) > 0)

    @property
    def fit_ready(self):
        return int(self.usable.sum()) >= 4

    def rows(self):
        for i in range(self.eps.size):
            c = bool(self.censored[i])
            yield {
                "eps": self.eps[i], "hits": int(self.hits[i]), "n_samples": self.n_samples,
                "neg_log_p": "" if c else self.neg_log_p[i],
                "stderr": "" if c else self.stderr[i], "censored": int(c),
            }

    def to_csv(self, path):
        with open(path, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(CURVE_COLUMNS)
            for r in self.rows():
                w.writerow([fmt(r[k]) for k in CURVE_COLUMNS])

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as f:
            rows = list(csv.DictReader(f))
        if not rows:
            raise ValueError(f"{path}: no rows")
        eps = [float(r["eps"]) for r in rows]
        hits = [int(r["hits"]) for r in rows]
        return cls.from_counts(eps, hits, int(rows[0]["n_samples"]))


CURVE_COLUMNS = ["eps", "hits", "n_samples", "neg_log_p", "stderr", "censored"]


def fmt(v):
    """Decimal text with full double precision (at least 9 significant digits)."""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    v = float(v)
    if math.isnan(v):
        return "nan"
    return repr(v) if math.isinf(v) else format(v, ".17g")


def geometric_grid(eps_max, eps_min, ratio=0.8):
    if not 0 < ratio < 1:
        raise ValueError("ratio must lie in (0, 1)")
    if not 0 < eps_min < eps_max:
        raise ValueError("need 0 < eps_min < eps_max")
    k = int(math.floor(math.log(eps_min / eps_max) / math.log(ratio) + 1e-9))
    return eps_max * ratio ** np.arange(k + 1)


def auto_eps_grid(norms, ratio=0.8, p_high=0.5, p_low=1e-4, min_hits=10):
    """Geometric grid from the empirical quantiles of stored norms, spanning
    P(||X|| < eps) from ``p_high`` down to max(p_low, min_hits / n)."""
    srt = np.sort(np.asarray(norms, dtype=float))
    n = srt.size
    lo_p = max(p_low, min_hits / n)
    eps_max = float(np.quantile(srt, p_high))
    eps_min = float(np.quantile(srt, lo_p))
    if not 0 < eps_min < eps_max:
        raise ValueError("norm sample too degenerate for an automatic grid")
    return geometric_grid(eps_max, eps_min, ratio)


def estimate_small_dev(sampler, norm, eps_grid, n_samples, rng, workers=1, min_samples=1000):
    if n_samples < min_samples:
        raise ValueError(f"n_samples must be >= {min_samples}")
    norms = sample_norms(sampler, norm, n_samples, rng, workers=workers)
    return SmallDevCurve.from_norms(norms, eps_grid)

# ---------------------------------------------------------------- fitting


@dataclass(frozen=True)
class RateFit:
    tau: float
    theta: float
    intercept: float
    residual_rms: float
    tau_ci: tuple
    n_points: int
    theta_ci: tuple = (0.0, 0.0)

    @property
    def constant(self):
        """c in phi ~ c eps^-tau (log 1/eps)^theta."""
        return math.exp(self.intercept)


def weighted_loglog(x, y, w, extra=None, level=0.95):
    """WLS of y on [1, x, (extra)] returning coefficients, their CIs and rms residual."""
    cols = [np.ones_like(x), x] + ([extra] if extra is not None else [])
    A = np.column_stack(cols)
    sw = np.sqrt(w)
    coef, *_ = np.linalg.lstsq(A * sw[:, None], y * sw, rcond=None)
    resid = y - A @ coef
    dof = x.size - A.shape[1]
    rss_w = float(np.sum(w * resid ** 2))
    s2 = rss_w / dof if dof > 0 else 0.0
    cov = s2 * np.linalg.pinv((A * w[:, None]).T @ A)
    half = stats.t.ppf(0.5 + level / 2, max(dof, 1)) * np.sqrt(np.clip(np.diag(cov), 0, None))
    rms = float(np.sqrt(np.mean(resid ** 2)))
    return coef, half, rms


def fit_rate(curve: SmallDevCurve, with_log_factor=False) -> RateFit:
    m = curve.usable
    if int(m.sum()) < 4:
        raise ValueError(f"need at least 4 uncensored points with phi > 0, have {int(m.sum())}")
    eps = curve.eps[m]
    phi = curve.neg_log_p[m]
    x = np.log(1.0 / eps)
    y = np.log(phi)
    se = curve.stderr[m] / phi
    if np.all(se > 0):
        w = 1.0 / se ** 2
    else:
        w = np.ones_like(x)
    extra = None
    if with_log_factor:
        if np.any(x < 1.0):
            raise ValueError("log(1/eps) must be >= 1 on fitted points when fitting a log factor")
        extra = np.log(x)
    coef, half, rms = weighted_loglog(x, y, w, extra)
    tau = float(coef[1])
    theta = float(coef[2]) if with_log_factor else 0.0
    th_ci = (theta - float(half[2]), theta + float(half[2])) if with_log_factor else (0.0, 0.0)
    return RateFit(tau, theta, float(coef[0]), rms, (tau - float(half[1]), tau + float(half[1])),
                   int(x.size), th_ci)


def bootstrap_tau(norms, eps, with_log_factor=False, n_boot=200, seed=0):
    """Percentile interval for tau, resampling trials (keeps the coupling across eps)."""
    norms = np.asarray(norms)
    gen = np.random.Generator(np.random.Philox(seed))
    taus = []
    for _ in range(n_boot):
        c = SmallDevCurve.from_norms(norms[gen.integers(0, norms.size, norms.size)], eps)
        if c.fit_ready:
            taus.append(fit_rate(c, with_log_factor).tau)
    if len(taus) < n_boot // 2:
        return (math.nan, math.nan)
    return tuple(float(v) for v in np.quantile(taus, [0.025, 0.975]))

# ---------------------------------------------------------------- predictions


@dataclass(frozen=True)
class RatePrediction:
    example_id: str
    tau_predicted: float
    theta_predicted: object   # float or (lower, upper)
    kind: str                 # two-sided | upper-bound | lower-bound
    reference: str
    params: dict = field(default_factory=dict)


def holder_rate(beta, gamma, alpha) -> float:
    if not 0 < beta <= 1:
        raise ValueError("beta must lie in (0, 1]")
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    inv = 1.0 / alpha - 0.5 + gamma * beta
    if inv <= 0:
        raise ValueError("1/alpha - 1/2 + gamma*beta must be positive")
    return 1.0 / inv


def _critical(alpha, beta):
    if beta <= max(1.0, alpha):
        return math.inf, 0.0, "two-sided", "norm infinite: phi = inf for every eps"
    if beta < 1.0 + alpha:
        return 1.0 / (beta / alpha - 1.0), 0.0, "two-sided", "critical, middle range"
    if beta == 1.0 + alpha:
        return alpha, 1.0 + alpha, "two-sided", "critical, boundary"
    return alpha, 1.0 + alpha - beta, "two-sided", "critical, large beta"


EXAMPLE_IDS = ("rl", "weighted_levy", "sheet", "sum_of_maxima", "holder", "ryznar", "brownian_sup")


def predicted_rate(example_id, **p) -> RatePrediction:
    """Predicted exponents; parameters are passed as keywords."""
    if example_id == "rl":
        H = float(p["H"])
        return RatePrediction("rl", 1.0 / H, 0.0, "two-sided",
                              "Riemann-Liouville process in L_q: phi ~ c eps^(-1/H)", dict(p))
    if example_id == "weighted_levy":
        a = float(p["alpha"])
        return RatePrediction("weighted_levy", a, 0.0, "two-sided",
                              "weighted stable Levy motion in L_q: eps^-alpha with constants between ||rho||_r and ||rho||_q",
                              dict(p))
    if example_id == "sheet":
        a, d = float(p["alpha"]), int(p["d"])
        return RatePrediction("sheet", a, (a * (d - 1), a * (d - 0.5)), "two-sided",
                              "d-parameter stable sheet in L_q, q finite", dict(p))
    if example_id == "sum_of_maxima":
        a, g, b = float(p["alpha"]), float(p["gamma"]), float(p.get("beta", 0.0))
        if g < a:
            return RatePrediction("sum_of_maxima", g, -b, "two-sided",
                                  "sum of maxima, gamma < alpha", dict(p))
        if g == a:
            tau, theta, kind, note = _critical(a, b)
            return RatePrediction("sum_of_maxima", tau, theta, kind, f"sum of maxima, {note}", dict(p))
        return RatePrediction("sum_of_maxima", math.inf, 0.0, "two-sided",
                              "sum of maxima, gamma > alpha: norm infinite", dict(p))
    if example_id == "holder":
        tau = holder_rate(float(p["beta"]), float(p["gamma"]), float(p["alpha"]))
        return RatePrediction("holder", tau, 0.0, "lower-bound",
                              "Hölder kernel with covering exponent gamma", dict(p))
    if example_id == "ryznar":
        a = float(p["alpha"])
        if not 0 < a < 1:
            raise ValueError("the universal bound needs alpha < 1")
        return RatePrediction("ryznar", a / (1.0 - a), 0.0, "upper-bound",
                              "universal upper bound for alpha < 1 (Ryznar)", dict(p))
    if example_id == "brownian_sup":
        return RatePrediction("brownian_sup", 2.0, 0.0, "two-sided",
                              "Brownian motion in sup norm: phi ~ (pi^2/8) eps^-2", dict(p))
    raise ValueError(f"unknown example id {example_id!r}; known: {', '.join(EXAMPLE_IDS)}")
