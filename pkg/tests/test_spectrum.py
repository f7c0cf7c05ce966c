import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from polylike import reference
from polylike.maps import map_spec_from_dict
from polylike.measure import Provenance, WeightedCloud, sample_equilibrium
from polylike.spectrum import (entropy_estimate, lyapunov, lyapunov_sweep, mixing_decay,
                               separated_count)

from conftest import poly

LOG2, LOG3, LOG4 = math.log(2), math.log(3), math.log(4)


def test_doubling_exponent(clouds, maps):
    s = lyapunov(maps["doubling"], clouds["doubling"], 200, 100)
    assert abs(s.exponents[0] - LOG2) <= max(3 * s.standard_errors[0], 1e-9)


@pytest.mark.parametrize("name,want", [("skew", (LOG4, LOG2)), ("skew_p0", (LOG4, LOG2)),
                                       ("torus", (LOG2, LOG2)), ("wd2z", (LOG3 / 2, LOG3 / 2))])
def test_two_variable_spectra(name, want, clouds, maps):
    s = lyapunov(maps[name], clouds[name], 200, 100)
    assert np.allclose(s.exponents, want, atol=0.02)
    assert s.consistent()


@pytest.mark.parametrize("name", reference.NAMES)
def test_exponent_sum_bound(name, clouds, maps):
    s = lyapunov(maps[name], clouds[name], 100, 50)
    assert s.sum >= math.log(maps[name].topological_degree) - 3 * s.sum_stderr - 1e-9


def test_lyapunov_ignores_weight_scale(clouds, maps):
    c = clouds["wd2z"]
    scaled = WeightedCloud(c.points, 7.0 * c.weights, c.provenance, c.seed, c.params)
    a = lyapunov(maps["wd2z"], c, 50, 40, seed=3)
    b = lyapunov(maps["wd2z"], scaled, 50, 40, seed=3)
    assert np.array_equal(a.exponents, b.exponents)


def test_lyapunov_worker_independent(clouds, maps):
    a = lyapunov(maps["skew"], clouds["skew"], 50, 100, seed=2, workers=1)
    b = lyapunov(maps["skew"], clouds["skew"], 50, 100, seed=2, workers=4)
    assert np.array_equal(a.exponents, b.exponents)


def test_mixing_constant_is_exactly_zero(clouds, maps):
    one = lambda z: np.ones(z.shape[:-1])
    re = lambda z: np.real(z[..., 0])
    for phi, psi in ((one, re), (re, one)):
        ser = mixing_decay(maps["doubling"], clouds["doubling"], phi, psi, 5)
        assert np.all(np.asarray(ser.values) == 0)


def test_mixing_fourier_mode(clouds, maps):
    re = lambda z: np.real(z[..., 0])
    ser = mixing_decay(maps["doubling"], clouds["doubling"], re, re, 6)
    assert ser.values[0] == pytest.approx(0.5, abs=0.05)
    assert all(v <= 3 * s for v, s in zip(ser.values[1:], ser.stderr[1:]))


def test_mixing_bump_rate(maps):
    cloud = sample_equilibrium(maps["doubling"], 400, per_walker=100, seed=4)
    bump = lambda z: 0.5 * (np.tanh((1 - np.abs(np.angle(z[..., 0]))) / 0.2) + 1)
    ser = mixing_decay(maps["doubling"], cloud, bump, bump, 10, seed=1)
    assert ser.fitted_rate <= 0.55


def test_entropy_doubling(clouds, maps):
    est = entropy_estimate(maps["doubling"], clouds["doubling"], n_max=12)
    assert 0.6 <= est.value <= 0.72


def test_entropy_single_point():
    c = WeightedCloud(np.array([[1 + 0j]]), np.ones(1), Provenance.BACKWARD_WALK)
    assert entropy_estimate(reference.load("doubling"), c, n_max=4).value == 0


@given(st.integers(1, 60), st.floats(0.01, 2))
def test_separated_count_bounds(n, eps):
    rng = np.random.default_rng(n)
    x = rng.random((n, 3))
    m = separated_count(x, eps)
    assert 1 <= m <= n
    assert separated_count(x, eps / 2) >= m or separated_count(x, eps / 2) >= 1
    assert separated_count(x, 1e-12) == len(np.unique(x, axis=0))


def test_separated_count_grid():
    g = np.array([[i, j] for i in range(5) for j in range(5)], dtype=float)
    assert separated_count(g, 0.5) == 25
    assert separated_count(g, 1.5) == 9


def test_sweep_quadratic_center():
    res = lyapunov_sweep(lambda c: poly(c, 0, 1), [0], walkers=50, per_walker=40,
                         orbit_length=100, samples=50)
    assert len(res.rows) == 1 and res.submean_ok is None
    assert res.rows[0].h == pytest.approx(2 * LOG2, abs=1e-6)


def test_sweep_rotating_lambda():
    def skew(lam):
        return map_spec_from_dict({"family": "Skew2D", "lambda": [lam.real, lam.imag], "P": [[0, 0]],
                                   "Q": [[0, 0], [0, 0], [1, 0]],
                                   "domain": {"shape": "Polydisc", "center": [[0, 0], [0, 0]],
                                              "radii": [4, 4]}})
    grid = [4 * np.exp(2j * np.pi * t / 5) for t in range(5)]
    res = lyapunov_sweep(skew, grid, walkers=40, per_walker=25, orbit_length=100, samples=40)
    hs = np.array([r.h for r in res.rows])
    assert all(r.valid for r in res.rows)
    assert np.allclose(hs, 2 * (LOG4 + LOG2), atol=0.02)
