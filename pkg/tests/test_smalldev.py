import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stablab.processes import IncrementSampler, LevyMotion, Lq, Sup
from stablab.rng import RngSpec
from stablab.smalldev import (
    CURVE_COLUMNS, ConstantSampler, ScalarSampler, SmallDevCurve, auto_eps_grid, bootstrap_tau,
    estimate_small_dev, fit_rate, geometric_grid, holder_rate, predicted_rate, sample_norms,
)


def normal(gen, n):
    return gen.standard_normal(n)


def cauchy(gen, n):
    return gen.standard_cauchy(n)


class TestEstimate:
    def test_zero_sampler(self):
        c = estimate_small_dev(ConstantSampler(0.0), None, [1.0, 0.1, 1e-3], 2000, RngSpec(1))
        assert np.all(c.neg_log_p == 0) and np.all(c.hits == 2000)
        assert not np.signbit(c.neg_log_p).any()

    def test_gaussian_at_one(self):
        c = estimate_small_dev(ScalarSampler(normal), None, [1.0], 200_000, RngSpec(2))
        assert c.neg_log_p[0] == pytest.approx(-math.log(0.6826894921370859), abs=3 * c.stderr[0])
        assert c.neg_log_p[0] == pytest.approx(0.38153, abs=0.01)

    def test_cauchy_at_one(self):
        c = estimate_small_dev(ScalarSampler(cauchy), None, [1.0], 200_000, RngSpec(3))
        assert c.neg_log_p[0] == pytest.approx(math.log(2), abs=3 * c.stderr[0])

    def test_stderr_scaling(self):
        a = estimate_small_dev(ScalarSampler(normal), None, [0.5], 100_000, RngSpec(4))
        b = estimate_small_dev(ScalarSampler(normal), None, [0.5], 200_000, RngSpec(4))
        assert b.stderr[0] / a.stderr[0] == pytest.approx(1 / math.sqrt(2), rel=0.05)

    def test_censoring(self):
        c = estimate_small_dev(ScalarSampler(normal), None, [1.0, 1e-9], 1000, RngSpec(5))
        assert c.censored.tolist() == [False, True]
        assert math.isnan(c.neg_log_p[1])

    def test_min_samples(self):
        with pytest.raises(ValueError):
            estimate_small_dev(ConstantSampler(), None, [1.0], 10, RngSpec(1))

    @pytest.mark.parametrize("grid", [[0.1, 1.0], [1.0, 1.0], [1.0, -0.5], []])
    def test_bad_grid(self, grid):
        with pytest.raises(ValueError):
            SmallDevCurve.from_norms(np.ones(10), grid)

    def test_worker_independence(self):
        s = IncrementSampler(LevyMotion(), 1.5, 64)
        runs = [sample_norms(s, Sup(), 3 * s.block_size + 17, RngSpec(6), workers=w) for w in (1, 2, 8)]
        assert all(np.array_equal(runs[0], r) for r in runs[1:])


class TestCurveIO:
    def test_csv_roundtrip(self, tmp_path):
        norms = np.abs(np.random.default_rng(0).standard_normal(5000))
        c = SmallDevCurve.from_norms(norms, geometric_grid(1.0, 1e-5, 0.5))
        path = tmp_path / "curve.csv"
        c.to_csv(path)
        assert path.read_text().splitlines()[0] == ",".join(CURVE_COLUMNS)
        d = SmallDevCurve.from_csv(path)
        np.testing.assert_array_equal(c.eps, d.eps)
        np.testing.assert_array_equal(c.hits, d.hits)
        np.testing.assert_array_equal(c.censored, d.censored)
        np.testing.assert_array_equal(c.neg_log_p[c.usable], d.neg_log_p[d.usable])
        d.to_csv(tmp_path / "again.csv")
        assert (tmp_path / "again.csv").read_bytes() == path.read_bytes()

    def test_grids(self):
        g = geometric_grid(1.0, 0.1, 0.5)
        np.testing.assert_allclose(g, [1.0, 0.5, 0.25, 0.125])
        with pytest.raises(ValueError):
            geometric_grid(1.0, 0.1, 1.5)
        a = auto_eps_grid(np.random.default_rng(1).random(10_000), ratio=0.7)
        assert a[0] == pytest.approx(0.5, abs=0.02) and a[-1] >= 1e-3 * 0.7


class TestFit:
    def test_exact_power(self):
        eps = geometric_grid(0.5, 0.01, 0.8)
        f = fit_rate(SmallDevCurve.synthetic(eps, 2.0 * eps ** -1.5))
        assert f.tau == pytest.approx(1.5, abs=1e-10)
        assert f.constant == pytest.approx(2.0, rel=1e-9)
        assert f.residual_rms < 1e-10

    def test_log_factor(self):
        eps = geometric_grid(0.3, 1e-4, 0.8)
        x = np.log(1 / eps)
        f = fit_rate(SmallDevCurve.synthetic(eps, 0.7 * eps ** -1.2 * x ** 0.8), with_log_factor=True)
        assert f.tau == pytest.approx(1.2, abs=1e-8) and f.theta == pytest.approx(0.8, abs=1e-8)
        with pytest.raises(ValueError):
            fit_rate(SmallDevCurve.synthetic([2.0, 1.0, 0.5, 0.25], [1.0, 2.0, 3.0, 4.0]), True)

    def test_noisy(self):
        gen = np.random.default_rng(7)
        eps = geometric_grid(0.5, 0.01, 0.85)
        phi = eps ** -1.5 * np.exp(0.02 * gen.standard_normal(eps.size))
        f = fit_rate(SmallDevCurve.synthetic(eps, phi, 0.02 * phi))
        assert 1.45 <= f.tau <= 1.55
        assert f.tau_ci[0] <= 1.5 <= f.tau_ci[1]

    def test_needs_four_points(self):
        c = SmallDevCurve.from_counts([1.0, 0.5, 0.25, 0.1], [500, 100, 10, 0], 1000)
        assert not c.fit_ready
        with pytest.raises(ValueError, match="4"):
            fit_rate(c)

    def test_zero_phi_excluded(self):
        c = SmallDevCurve.from_counts([4.0, 1.0, 0.5, 0.25, 0.1], [1000, 500, 100, 10, 1], 1000)
        assert c.usable.tolist() == [False, True, True, True, True]

    def test_bootstrap(self):
        # |U| with U uniform on [-1, 1]: phi = log(1/eps), fit is exact only asymptotically
        norms = np.random.default_rng(2).random(50_000)
        eps = geometric_grid(0.05, 0.002, 0.7)
        lo, hi = bootstrap_tau(norms, eps, n_boot=50)
        assert lo < hi and lo > 0

    @settings(max_examples=25, deadline=None)
    @given(tau=st.floats(0.2, 5.0), c=st.floats(0.01, 100.0))
    def test_fit_recovers(self, tau, c):
        eps = geometric_grid(1.0, 0.05, 0.8)
        f = fit_rate(SmallDevCurve.synthetic(eps, c * eps ** -tau))
        assert f.tau == pytest.approx(tau, abs=1e-8)


class TestPredictions:
    def test_holder(self):
        assert holder_rate(1.0, 1.0, 2.0) == pytest.approx(1.0)
        assert holder_rate(0.5, 1.0, 1.0) == pytest.approx(1.0)
        assert holder_rate(1.0, 1.0, 1.0) == pytest.approx(2 / 3)
        with pytest.raises(ValueError):
            holder_rate(1.5, 1.0, 1.0)
        with pytest.raises(ValueError):
            holder_rate(0.5, 0.0, 1.0)

    def test_examples(self):
        assert predicted_rate("rl", H=0.6).tau_predicted == pytest.approx(1 / 0.6)
        assert predicted_rate("weighted_levy", alpha=1.3).tau_predicted == 1.3
        sh = predicted_rate("sheet", alpha=1.5, d=2)
        assert sh.tau_predicted == 1.5 and sh.theta_predicted == (1.5, 2.25)
        r = predicted_rate("ryznar", alpha=0.5)
        assert r.tau_predicted == pytest.approx(1.0) and r.kind == "upper-bound"
        assert predicted_rate("brownian_sup").tau_predicted == 2.0
        with pytest.raises(ValueError):
            predicted_rate("ryznar", alpha=1.2)
        with pytest.raises(ValueError):
            predicted_rate("nope")

    @pytest.mark.parametrize("gamma,beta,tau,theta", [
        (1.0, 2.0, 1.0, -2.0),              # gamma < alpha
        (1.5, 1.0, math.inf, 0.0),          # critical, divergent
        (1.5, 2.0, 3.0, 0.0),               # critical, middle range
        (1.5, 2.5, 1.5, 2.5),               # critical, boundary
        (1.5, 3.5, 1.5, -1.0),              # critical, large beta
        (2.0, 0.0, math.inf, 0.0),          # gamma > alpha
    ])
    def test_sum_of_maxima(self, gamma, beta, tau, theta):
        p = predicted_rate("sum_of_maxima", alpha=1.5, gamma=gamma, beta=beta)
        assert p.tau_predicted == pytest.approx(tau) and p.theta_predicted == pytest.approx(theta)
