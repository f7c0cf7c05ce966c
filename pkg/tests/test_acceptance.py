"""The twelve acceptance criteria, each at its stated tolerance and runtime budget."""
import glob
import json
import math
import os
import time

import numpy as np
from scipy import stats

from polylike import cli, reference
from polylike.exceptional import AlgebraicSet, Line, Point, invariance_verdict
from polylike.geometry import degree_table
from polylike.green1d import functional_residual, green_value, hausdorff_dimension, holder_check
from polylike.maps import analytic_graph
from polylike.measure import invariance_report, mc_stderr, sample_equilibrium, standard_tests
from polylike.periodic import discrepancy, moment_family, periodic_measure, periodic_points
from polylike.spectrum import entropy_estimate, lyapunov, mixing_decay

LOG = math.log
CONFIGS = os.path.join(os.path.dirname(__file__), "..", "configs", "acceptance")


def test_criterion_01_circle_oracle(acceptance_log):
    t0 = time.perf_counter()
    f = reference.load("doubling")
    cloud = sample_equilibrium(f, 100, per_walker=100, seed=1)
    z = cloud.points[:, 0]
    radial = float(np.max(np.abs(np.abs(z) - 1)))
    ks = stats.kstest(np.mod(np.angle(z), 2 * np.pi) / (2 * np.pi), "uniform").statistic
    crit = 1.63 / math.sqrt(len(z))
    dt = time.perf_counter() - t0
    ok = len(z) == 10**4 and radial < 1e-8 and ks < crit and dt < 10
    assert acceptance_log(1, ok, f"radial {radial:.1e}, KS {ks:.4f} < {crit:.4f}", dt)


def test_criterion_02_jacobian_integral(acceptance_log):
    t0 = time.perf_counter()
    parts, ok = [], True
    for name, f in reference.all_maps().items():
        cloud = sample_equilibrium(f, 100, per_walker=100, seed=2)
        logj = 2 * np.real(f.log_abs_det(cloud.points))
        val, se = float(np.sum(cloud.weights * logj)), mc_stderr(cloud, logj)
        good = val >= LOG(f.topological_degree) - 3 * se
        ok &= good
        parts.append(f"{name} {val:.4f}>={LOG(f.topological_degree):.4f}")
    dt = time.perf_counter() - t0
    ok &= dt < 60
    assert acceptance_log(2, ok, "; ".join(parts), dt)


def test_criterion_03_skew_ground_truth(acceptance_log):
    t0 = time.perf_counter()
    f = reference.load("skew")
    cloud = sample_equilibrium(f, 100, per_walker=100, seed=3)
    spec = lyapunov(f, cloud, orbit_length=500, samples=200, seed=3)
    h, _ = analytic_graph(f, cloud.points[:, 1])
    gap = float(np.max(np.abs(cloud.points[:, 0] - h)))
    err = np.abs(spec.exponents - [LOG(4), LOG(2)])
    dt = time.perf_counter() - t0
    ok = bool(np.all(err <= 0.02)) and gap < 1e-5 and dt < 60
    assert acceptance_log(3, ok, f"exponents {spec.exponents.round(6).tolist()}, graph gap {gap:.1e}", dt)


def test_criterion_04_invariance(acceptance_log):
    t0 = time.perf_counter()
    bad = []
    for name, f in reference.all_maps().items():
        cloud = sample_equilibrium(f, 100, per_walker=100, seed=4)
        rep = invariance_report(f, cloud, standard_tests(f.k, 12))
        assert len(rep) == 12
        bad += [f"{name}:{r.name}" for r in rep if not r.within(3.0)]
    dt = time.perf_counter() - t0
    ok = not bad and dt < 60
    assert acceptance_log(4, ok, f"72 residual pairs, outside 3 sigma: {bad or 'none'}", dt)


def test_criterion_05_mixing(acceptance_log):
    t0 = time.perf_counter()
    f = reference.load("doubling")
    cloud = sample_equilibrium(f, 400, per_walker=100, seed=5)
    worst = 0.0
    for mode in (lambda z: np.real(z[..., 0]), lambda z: np.imag(z[..., 0])):
        ser = mixing_decay(f, cloud, mode, mode, 8, seed=5)
        worst = max(worst, max(v / s for v, s in zip(ser.values[1:], ser.stderr[1:])))
    bump = lambda z: 0.5 * (np.tanh((1 - np.abs(np.angle(z[..., 0]))) / 0.2) + 1)
    rate = mixing_decay(f, cloud, bump, bump, 10, seed=6).fitted_rate
    dt = time.perf_counter() - t0
    ok = worst <= 3 and rate <= 0.55 and dt < 30
    assert acceptance_log(5, ok, f"Fourier |v_n|/sigma max {worst:.2f}, bump rate {rate:.3f}", dt)


def test_criterion_06_periodic_points(acceptance_log):
    t0 = time.perf_counter()
    f = reference.load("doubling")
    counts = [periodic_points(f, n).count for n in range(1, 10)]
    counts_ok = counts == [2**n for n in range(1, 10)]
    skew = reference.load("skew")
    mult_err = 0.0
    for n in range(1, 6):
        p = periodic_points(skew, n)
        want = np.stack([np.full(len(p), 4.0**n), 2**n * p.points[:, 1] ** (2**n - 1)], axis=1)
        for g, w in zip(p.multipliers, want):
            scale = np.maximum(np.abs(w), 1)
            mult_err = max(mult_err, min(np.max(np.abs(g - w) / scale), np.max(np.abs(g[::-1] - w) / scale)))
    cloud = sample_equilibrium(f, 400, per_walker=100, seed=6)
    disc = discrepancy(periodic_measure(periodic_points(f, 10)), cloud, moment_family(1))
    dt = time.perf_counter() - t0
    ok = counts_ok and mult_err < 1e-8 and disc < 0.02 and dt < 60
    assert acceptance_log(6, ok, f"counts {'exact' if counts_ok else counts}, multiplier err {mult_err:.1e}, "
                                 f"discrepancy {disc:.4f}", dt)


def test_criterion_07_torus_local_degree(acceptance_log):
    t0 = time.perf_counter()
    f = reference.load("torus")
    tab = degree_table(f, 1, 8, 20000, seed=7)
    cloud = sample_equilibrium(f, 100, per_walker=100, seed=7)
    spec = lyapunov(f, cloud, 200, 100, seed=7)
    lam_min = float(spec.exponents[-1])
    bound = 0.5 * LOG(f.topological_degree / math.exp(tab.growth_rate))
    regime = "equality" if abs(lam_min - bound) <= 0.05 else "strict"
    dt = time.perf_counter() - t0
    ok = -0.05 <= tab.growth_rate <= 0.05 and lam_min >= bound - 0.05 and dt < 120
    assert acceptance_log(7, ok, f"growth {tab.growth_rate:+.4f}, lambda_min {lam_min:.4f} >= "
                                 f"{bound:.4f} - 0.05 ({regime} regime)", dt)


def test_criterion_08_degree_ceiling(acceptance_log):
    t0 = time.perf_counter()
    parts, ok = [], True
    for name, f in reference.all_maps().items():
        tab = degree_table(f, 1, 6, 20000, seed=8)
        ok &= tab.growth_rate <= LOG(f.topological_degree) + 0.1
        parts.append(f"{name} {tab.growth_rate:.3f}<={LOG(f.topological_degree) + 0.1:.3f}")
    dt = time.perf_counter() - t0
    ok &= dt < 120
    assert acceptance_log(8, ok, "; ".join(parts), dt)


def test_criterion_09_entropy(acceptance_log):
    t0 = time.perf_counter()
    parts, ok = [], True
    for name, walkers, n_max in (("doubling", 100, 12), ("wd2z", 400, 10)):
        f = reference.load(name)
        cloud = sample_equilibrium(f, walkers, per_walker=100, seed=9)
        h = entropy_estimate(f, cloud, n_max=n_max, seed=9).value
        target = LOG(f.topological_degree)
        ok &= target - 0.1 <= h <= target + 0.05
        parts.append(f"{name} {h:.4f} in [{target - 0.1:.3f}, {target + 0.05:.3f}]")
    dt = time.perf_counter() - t0
    ok &= dt < 120
    assert acceptance_log(9, ok, "; ".join(parts), dt)


def test_criterion_10_potential_suite(acceptance_log):
    t0 = time.perf_counter()
    f = reference.load("doubling")
    g2 = float(green_value(f, 2 + 0j))
    rng = np.random.default_rng(10)
    z = rng.uniform(1, 3, 100) * np.exp(2j * np.pi * rng.random(100))
    resid = float(np.max(functional_residual(f, z)))
    hds = {}
    for name in ("doubling", "chebyshev"):
        m = reference.load(name)
        hds[name] = hausdorff_dimension(m, sample_equilibrium(m, 1000, per_walker=100, seed=10)).value
    cheb = reference.load("chebyshev")
    cloud = sample_equilibrium(cheb, 1000, per_walker=100, seed=11)
    radii = [0.01, 0.02, 0.04, 0.08]
    pass45 = holder_check(cheb, cloud, 0.45, radii).passed
    fail90 = holder_check(cheb, cloud, 0.9, radii)
    dt = time.perf_counter() - t0
    ok = (abs(g2 - LOG(2)) <= 1e-9 and resid < 1e-9 and all(abs(v - 1) <= 0.02 for v in hds.values())
          and pass45 and not fail90.passed and abs(abs(fail90.worst_center) - 2) < 0.05 and dt < 60)
    assert acceptance_log(10, ok, f"G(2)-log2 {g2 - LOG(2):.1e}, residual {resid:.1e}, HD "
                                  f"{hds['doubling']:.4f}/{hds['chebyshev']:.4f}, Hoelder 0.45 "
                                  f"{'pass' if pass45 else 'fail'}, 0.9 {'fail' if not fail90.passed else 'pass'} "
                                  f"at {fail90.worst_center.real:+.3f}", dt)


def test_criterion_11_exceptional(acceptance_log):
    t0 = time.perf_counter()
    axes = AlgebraicSet((Line.axis(0), Line.axis(1)))
    members = invariance_verdict(reference.load("wd2z"), axes, 20, 6, seed=11)
    controls = (invariance_verdict(reference.load("doubling"), AlgebraicSet((Point((1 + 0j,)),)), 1, 6)
                + invariance_verdict(reference.load("torus"), AlgebraicSet((Line((1, -1)),)), 5, 4, seed=11))
    monotone = all(v.series.monotone() for v in members + controls)
    dt = time.perf_counter() - t0
    ok = (len(members) == 20 and all(v.member for v in members)
          and all(not v.member and v.drop_n == 1 for v in controls) and monotone and dt < 30)
    assert acceptance_log(11, ok, f"{sum(v.member for v in members)}/20 MEMBER, controls drop at "
                                  f"{sorted({v.drop_n for v in controls})}, monotone {monotone}", dt)


def test_criterion_12_determinism(acceptance_log, tmp_path):
    t0 = time.perf_counter()
    differ = []
    paths = sorted(glob.glob(os.path.join(CONFIGS, "*.json")))
    for path in paths:
        name = os.path.splitext(os.path.basename(path))[0]
        bodies = []
        for w in (1, 4):
            out = str(tmp_path / f"{name}_w{w}")
            assert cli.main(["--config", path, "--out", out, "--workers", str(w)]) == 0, name
            bodies.append(cli.csv_body(out + ".csv"))
        if bodies[0] != bodies[1]:
            differ.append(name)
    dt = time.perf_counter() - t0
    ok = not differ and len(paths) > 0
    assert acceptance_log(12, ok, f"{len(paths)} experiment configs, differing CSV bodies: {differ or 'none'}", dt)
