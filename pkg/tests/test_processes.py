import math

import numpy as np
import pytest
from scipy import optimize, stats

from stablab.errors import BudgetError
from stablab.processes import (
    BlockL1LinfPow2, DiagonalSAS, ExplicitTheta, IncrementSampler, LePageSampler, LevyMotion, Lq,
    PathSample, PowerLog, PowerTheta, PowerWeight, RiemannLiouville, Sheet, SumOfMaxima, Sup,
    WeightedLevy, grid_points, norm, sample_path_increments, sample_path_lepage, sum_of_maxima_sample,
)
from stablab.rng import RngSpec
from stablab.stable import lepage_stream, UnitCube

KERNELS = [LevyMotion(), RiemannLiouville(0.6), RiemannLiouville(1.3), WeightedLevy(PowerWeight(0.5)), Sheet(2)]


def _z(x, lam, alpha, scale):
    c = np.cos(lam * x)
    return abs(c.mean() - math.exp(-lam ** alpha * scale)) / (c.std(ddof=1) / math.sqrt(x.size))


class TestIncrementSampler:
    @pytest.mark.parametrize("kernel", KERNELS, ids=lambda k: type(k).__name__)
    @pytest.mark.parametrize("alpha", [1.0, 1.5])
    def test_marginal_char_function(self, kernel, alpha):
        G = 16 if isinstance(kernel, Sheet) else 64
        paths = IncrementSampler(kernel, alpha, G).paths(40_000, RngSpec(11).generator())
        grid = grid_points(G)
        for idx, lam in ((G - 1, 0.5), (G // 2 - 1, 1.0), (G // 4 - 1, 2.0)):
            if isinstance(kernel, Sheet):
                x, t = paths[:, idx, G - 1], np.array([grid[idx], 1.0])
            else:
                x, t = paths[:, idx], grid[idx]
            assert _z(x, lam, alpha, float(kernel.alpha_norm(t, alpha))) < 3.5

    def test_gaussian_levy_is_scaled_brownian(self):
        x = IncrementSampler(LevyMotion(), 2.0, 32).paths(50_000, RngSpec(2).generator())
        assert np.var(x[:, -1]) == pytest.approx(2.0, rel=0.03)
        assert np.var(x[:, 15]) == pytest.approx(1.0, rel=0.03)

    def test_sheet_one_equals_levy(self):
        a = IncrementSampler(Sheet(1), 1.3, 50).paths(20, RngSpec(3).generator())
        b = IncrementSampler(LevyMotion(), 1.3, 50).paths(20, RngSpec(3).generator())
        assert np.array_equal(a, b)
        na = IncrementSampler(Sheet(1), 1.3, 50).norms(20, RngSpec(3).generator(), Lq(2.0))
        nb = IncrementSampler(LevyMotion(), 1.3, 50).norms(20, RngSpec(3).generator(), Lq(2.0))
        assert np.array_equal(na, nb)

    def test_fused_norm_matches_paths(self):
        s = IncrementSampler(WeightedLevy(PowerWeight(1.0)), 1.4, 100)
        paths = s.paths(50, RngSpec(4).generator())
        fused = s.norms(50, RngSpec(4).generator(), Lq(3.0))
        direct = [norm(PathSample(s.grid, p), Lq(3.0)) for p in paths]
        np.testing.assert_allclose(fused, direct, rtol=1e-12)
        sup = s.norms(50, RngSpec(4).generator(), Sup())
        np.testing.assert_allclose(sup, np.abs(paths).max(axis=1), rtol=1e-12)

    def test_rl_rejects_nonintegrable(self):
        with pytest.raises(ValueError):
            IncrementSampler(RiemannLiouville(0.9), 0.5, 16)
        with pytest.raises(ValueError):
            IncrementSampler(RiemannLiouville(0.0), 1.5, 16)

    def test_grid_refinement(self):
        alpha, q = 1.2, 2.0
        med = []
        for G in (128, 256):
            s = IncrementSampler(RiemannLiouville(0.6), alpha, G)
            med.append(np.median(s.norms(50_000, RngSpec(5, G).generator(), Lq(q))))
        assert abs(med[1] / med[0] - 1) < 0.02

    def test_single_path(self):
        p = sample_path_increments(RiemannLiouville(0.7), 1.5, 32, RngSpec(6))
        assert p.values.shape == (32,) and np.all(np.isfinite(p.values))


class TestLePage:
    @pytest.mark.parametrize("kernel", [LevyMotion(), RiemannLiouville(0.6)], ids=lambda k: type(k).__name__)
    @pytest.mark.parametrize("alpha", [1.0, 1.5])
    def test_char_function(self, kernel, alpha):
        s = LePageSampler(kernel, alpha, [0.5, 1.0], J=1000)
        x = s.paths(20_000, RngSpec(7).generator())
        for i, t in enumerate((0.5, 1.0)):
            for lam in (0.5, 1.0, 2.0):
                assert _z(x[:, i], lam, alpha, float(kernel.alpha_norm(t, alpha))) < 3.5

    @pytest.mark.parametrize("kernel", [LevyMotion(), RiemannLiouville(0.6)], ids=lambda k: type(k).__name__)
    def test_agrees_with_increments(self, kernel):
        alpha = 1.5
        a = LePageSampler(kernel, alpha, [1.0], J=1000).paths(10_000, RngSpec(8).generator())[:, 0]
        b = IncrementSampler(kernel, alpha, 64).paths(10_000, RngSpec(9).generator())[:, -1]
        d = stats.ks_2samp(a, b).statistic
        assert d < 1.628 * math.sqrt(2 / 10_000)  # 1% critical value

    def test_zero_kernel(self):
        k = WeightedLevy(lambda t: 0.0 * np.asarray(t))
        stream = lepage_stream(UnitCube(), 500, RngSpec(1))
        p = sample_path_lepage(k, 1.2, stream, [0.25, 0.5, 1.0], RngSpec(2))
        assert np.all(p.values == 0)

    def test_flags_and_gaussian_rejected(self):
        s = LePageSampler(LevyMotion(), 1.0, [1.0], J=100)
        assert s.flags["below_j_min"]
        assert not LePageSampler(LevyMotion(), 0.5, [1.0], J=1000).flags["below_j_min"]
        with pytest.raises(ValueError):
            LePageSampler(LevyMotion(), 2.0, [1.0])

    def test_rough_rl_skips_compensation(self):
        # H - 1/alpha < -1/2: kernel not square integrable
        s = LePageSampler(RiemannLiouville(0.1), 1.5, [1.0], J=200)
        assert not s.flags["remainder_compensated"]


class TestNorm:
    def test_constant(self):
        g = grid_points(100)
        assert norm(PathSample(g, np.full(100, -2.5)), Lq(3.0)) == pytest.approx(2.5)

    def test_identity_l2(self):
        G = 1000
        g = grid_points(G)
        assert abs(norm(PathSample(g, g), Lq(2.0)) - 1 / math.sqrt(3)) < 1.0 / G

    def test_spike(self):
        v = np.zeros(50)
        v[17] = -4.0
        assert norm(PathSample(grid_points(50), v), Sup()) == 4.0

    def test_blocks(self):
        v = np.arange(1.0, 7.0)  # levels 1 (2 values) and 2 (4 values)
        assert norm(PathSample(np.arange(6.0), v), BlockL1LinfPow2(2)) == 2.0 + 6.0
        with pytest.raises(ValueError):
            norm(PathSample(np.arange(5.0), v[:5]), BlockL1LinfPow2(2))

    def test_lq_bounds(self):
        with pytest.raises(ValueError):
            Lq(0.5)
        with pytest.raises(ValueError):
            Lq(math.inf)


class TestSumOfMaxima:
    def test_single_level_median(self):
        t = math.tan(math.pi / (2 * math.sqrt(2)))
        x = SumOfMaxima(ExplicitTheta((1.0,)), 1, 1.0).norms(200_000, RngSpec(1).generator())
        # (2/pi arctan t)^2 is the CDF of the maximum of two |Cauchy| variables
        cdf_at = lambda s: (2 / math.pi * math.atan(s)) ** 2
        assert cdf_at(np.median(x)) == pytest.approx(0.5, abs=3 * 0.5 / math.sqrt(x.size) * 2)
        assert optimize.brentq(lambda s: cdf_at(s) - 0.5, 0, 100) == pytest.approx(t)

    def test_zero_theta(self):
        s = SumOfMaxima(ExplicitTheta((0.0, 0.0, 0.0)), 3, 1.5)
        assert np.all(s.norms(100, RngSpec(2).generator()) == 0)
        assert sum_of_maxima_sample(ExplicitTheta((0.0,)), 1, 1.2, RngSpec(3)) == 0.0

    def test_memory_cap(self):
        with pytest.raises(BudgetError):
            SumOfMaxima(PowerLog(1.0), 30, 1.5)

    def test_certificate_shrinks_with_levels(self):
        certs = [SumOfMaxima(PowerLog(1.0), L, 1.5).certificate for L in (4, 8, 12)]
        assert certs[0] > certs[1] > certs[2] > 0
        # critical case with beta <= alpha: the remainder diverges
        assert math.isinf(SumOfMaxima(PowerLog(1.5, 1.0), 4, 1.5).certificate)

    def test_frechet_tail_matches_direct_levels(self):
        theta = PowerLog(1.0)
        direct = SumOfMaxima(theta, 12, 1.5, tail="frechet").norms(6000, RngSpec(4).generator())
        approx = SumOfMaxima(theta, 6, 1.5, tail="frechet").norms(6000, RngSpec(5).generator())
        # independent samples; levels 7..12 are simulated exactly in one, Frechet limits in the other
        assert np.median(approx) == pytest.approx(np.median(direct), rel=0.03)

    def test_vector_norm(self):
        s = SumOfMaxima(PowerLog(1.0), 4, 1.2)
        v = s.vector(RngSpec(6))
        blocks = [np.abs(v[(1 << n) - 2:(1 << (n + 1)) - 2]).max() for n in range(1, 5)]
        assert norm(PathSample(np.arange(v.size, dtype=float), v), BlockL1LinfPow2(4)) == pytest.approx(sum(blocks))

    def test_gaussian_levels(self):
        x = SumOfMaxima(ExplicitTheta((1.0,)), 1, 2.0).norms(50_000, RngSpec(7).generator())
        # max of two |N(0, 2)|: P(M <= s) = (2 Phi(s / sqrt 2) - 1)^2
        s = np.median(x)
        assert (2 * stats.norm.cdf(s / math.sqrt(2)) - 1) ** 2 == pytest.approx(0.5, abs=0.01)


def test_diagonal_certificate():
    d = DiagonalSAS(PowerTheta(3.0), 1000, 0.5)
    assert 0 < d.certificate < 0.02
    x = d.norms(1000, RngSpec(1).generator(), Lq(1.0))
    assert np.all(x > 0)
