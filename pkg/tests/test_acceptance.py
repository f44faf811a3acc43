"""Acceptance criteria C1-C13 at their stated scale and tolerance.

Each test records a one-line PASS/FAIL summary printed at the end of the run.
"""
import filecmp
import math
import os
import warnings

import numpy as np
import pytest
from scipy import integrate, stats

from stablab.experiments import REGISTRY, run_experiment
from stablab.processes import IncrementSampler, LevyMotion, RiemannLiouville
from stablab.rng import RngSpec
from stablab.stable import c_alpha

SEED = 1


def _run(tmp_path, eid, **overrides):
    cfg = {"experiment_id": eid, "master_seed": SEED, **overrides}
    return run_experiment(cfg, out_dir=str(tmp_path / eid))


def _check(rep, name):
    return next(c for c in rep.checks if c.name == name)


def _c_alpha_oracle(a):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        head, _ = integrate.quad(lambda x: x ** -a * math.sin(x), 0, 1, epsabs=0, epsrel=1e-13, limit=200)
        tail, _ = integrate.quad(lambda x: x ** -a, 1, np.inf, weight="sin", wvar=1.0, epsabs=1e-14, limlst=200)
        mom, _ = integrate.quad(lambda x: 2 * x ** a * stats.norm.pdf(x), 0, np.inf, epsabs=0, epsrel=1e-13)
    return math.sqrt(2) * ((head + tail) * mom) ** (-1 / a)


def test_c1_c_alpha_oracle(criterion):
    grid = np.linspace(0.05, 1.95, 20)
    errs = [abs(c_alpha(a) / _c_alpha_oracle(a) - 1) for a in grid]
    at_one = abs(c_alpha(1.0) - 2 / math.sqrt(math.pi))
    ok = at_one < 1e-9 and max(errs) < 1e-9
    criterion("C1", ok, f"|c_1 - 2/sqrt(pi)| = {at_one:.2e}, max rel err on 20-point grid = {max(errs):.2e}")
    assert ok


def test_c2_marginal_char_function(criterion):
    worst = 0.0
    for kernel in (LevyMotion(), RiemannLiouville(0.6)):
        for alpha in (1.0, 1.5):
            x = IncrementSampler(kernel, alpha, 64).paths(100_000, RngSpec(SEED, 20).generator())[:, -1]
            for lam in (0.5, 1.0, 2.0):
                c = np.cos(lam * x)
                target = math.exp(-lam ** alpha * float(kernel.alpha_norm(1.0, alpha)))
                z = abs(c.mean() - target) / (c.std(ddof=1) / math.sqrt(x.size))
                worst = max(worst, z)
    ok = worst < 3
    criterion("C2", ok, f"max |z| over 12 (kernel, alpha, lambda) cells = {worst:.2f} (< 3)")
    assert ok


def test_c3_brownian_sup(tmp_path, criterion):
    rep = _run(tmp_path, "brownian_sup")
    tau, const = _check(rep, "tau"), _check(rep, "constant")
    criterion("C3", rep.passed, f"tau = {tau.value:.3f} in [1.8, 2.2]; constant = {const.value:.4f} "
                                f"vs pi^2/8 = {math.pi ** 2 / 8:.4f} (25%)")
    assert rep.passed


def test_c4_riemann_liouville(tmp_path, criterion):
    rep = _run(tmp_path, "rl_smalldev", H=0.6, alpha=1.2, q=2.0)
    c = _check(rep, "tau")
    criterion("C4", c.passed, f"tau = {c.value:.4f}, target 1/H = {1 / 0.6:.4f} +- 15%")
    assert c.passed


def test_c5_weighted_levy(tmp_path, criterion):
    rep = _run(tmp_path, "weighted_levy", alpha=1.0, q=2.0, kappa=0.0)
    c = _check(rep, "tau")
    criterion("C5", c.passed, f"tau = {c.value:.4f}, target alpha = 1 +- 15%")
    assert c.passed


def test_c6_case_b_slope(tmp_path, criterion):
    rep = _run(tmp_path, "gap_case_b", a=2.0, nu=0.0, alpha=1.0, J=10 ** 6, n_seeds=10)
    c = _check(rep, "slope_seeds")
    slopes = rep.fits[0]["slopes"]
    criterion("C6", c.passed, f"{c.value}/10 seeds with slope -2 +- 0.15 on k in [10, 1e3] "
                              f"(range {min(slopes):.3f}..{max(slopes):.3f})")
    assert c.passed


def test_c7_case_a_slope(tmp_path, criterion):
    rep = _run(tmp_path, "gap_case_a", nu=2.0, alpha=1.0, J=10 ** 6, n_seeds=1)
    s, comp = _check(rep, "slope"), _check(rep, "compensated_ratio")
    ok = s.passed and comp.passed
    criterion("C7", ok, f"slope = {s.value:.3f} (-1 +- 0.15, log factor fitted, k in {rep.fits[0]['k_range']}); "
                        f"lambda* k log k max/min = {comp.value:.3f} (< 4)")
    assert ok


def test_c8_distinct_counts(tmp_path, criterion):
    rep = _run(tmp_path, "nm_counts", nu=2.0, m_values=[100, 1000, 10000], replications=100,
               uniform_replications=100_000)
    ratios = [c.value for c in rep.checks if c.name.startswith("variance")]
    uni = _check(rep, "uniform_pair_mean")
    criterion("C8", rep.passed, f"E N_2 MC = {uni.value:.4f} (1.5 within 3 SE); "
                                f"Var/E N_m = {', '.join(f'{r:.3f}' for r in ratios)} (<= 1.2)")
    assert rep.passed


def test_c9_gap_flatness(tmp_path, criterion):
    ra = _run(tmp_path, "gap_case_a", nu=2.0, alpha=1.0, J=10 ** 6, n_seeds=1, k_low=100, k_high=100_000)
    rb = _run(tmp_path, "gap_case_b", a=2.0, nu=0.0, alpha=1.0, J=10 ** 6, n_seeds=1, n_low=100, n_high=100_000)
    fa, fb = _check(ra, "gap_flatness"), _check(rb, "gap_flatness")
    ok = fa.passed and fb.passed
    criterion("C9", ok, f"case a G_n/log n max/min = {fa.value:.3f} on n in [1e2, {ra.notes['N_J']}]; "
                        f"case b G_n max/min = {fb.value:.3f} on n in {rb.notes['gap_range']} (< 3)")
    assert ok


def test_c10_gap_target(tmp_path, criterion):
    rep = _run(tmp_path, "gap_target", alpha=1.0, n_low=10, n_high=1000, n_seeds=10)
    c = _check(rep, "lower_bound_seeds")
    mins = rep.notes["per_seed_min_ratio"]
    criterion("C10", c.passed, f"{c.value}/10 seeds with min lambda*/(sigma d) > 0.1 (smallest {min(mins):.3f})")
    assert c.passed


def test_c11_sum_of_maxima(tmp_path, criterion):
    rep = _run(tmp_path, "sum_of_maxima", gamma=1.0, beta=0.0, alpha=1.5, levels=14, n_samples=10_000)
    t, cert = _check(rep, "tau"), _check(rep, "certificate_ratio")
    criterion("C11", rep.passed, f"tau = {t.value:.3f} vs gamma = 1 +- 25%; certificate/eps_min = {cert.value:.2e} (< 0.05)")
    assert rep.passed


def test_c12_ryznar(tmp_path, criterion):
    rep = _run(tmp_path, "ryznar_bound", alpha=0.5, theta_power=3.0)
    c = _check(rep, "tau_upper")
    criterion("C12", c.passed, f"tau = {c.value:.3f} <= 1.1")
    assert c.passed


SMALL = {
    "rl_smalldev": {"n_samples": 2000, "grid": 64, "n_boot": 5},
    "weighted_levy": {"n_samples": 2000, "grid": 64, "n_boot": 5},
    "sheet": {"n_samples": 2000, "grid": 8, "n_boot": 5},
    "sum_of_maxima": {"n_samples": 2000, "levels": 8, "n_boot": 5},
    "gap_case_a": {"J": 20000, "K_max": 20000, "n_seeds": 4, "k_high": 2000},
    "gap_case_b": {"J": 20000, "K_max": 20000, "n_seeds": 4, "slope_k_high": 100},
    "gap_target": {"J": 20000, "K_max": 20000, "n_seeds": 4, "n_high": 100},
    "ryznar_bound": {"n_samples": 2000, "dimension": 100, "n_boot": 5},
    "nm_counts": {"K_max": 20000, "m_values": [100, 1000], "replications": 20, "uniform_replications": 1000},
    "brownian_sup": {"n_samples": 3000, "grid": 256, "n_boot": 5},
}


def test_c13_worker_determinism(tmp_path, criterion):
    assert set(SMALL) == set(REGISTRY)
    mismatched = []
    for eid, over in SMALL.items():
        dirs = []
        for w in (1, 8):
            d = tmp_path / f"{eid}_w{w}"
            run_experiment({"experiment_id": eid, "master_seed": 7, **over}, out_dir=str(d), workers=w)
            dirs.append(d)
        csvs = sorted(f for f in os.listdir(dirs[0]) if f.endswith(".csv"))
        assert csvs
        _, diff, errors = filecmp.cmpfiles(dirs[0], dirs[1], csvs, shallow=False)
        mismatched += [f"{eid}/{f}" for f in diff + errors]
    ok = not mismatched
    criterion("C13", ok, f"{len(SMALL)} experiments, CSVs byte-identical for workers 1 vs 8"
              + ("" if ok else f"; differing: {mismatched}"))
    assert ok
