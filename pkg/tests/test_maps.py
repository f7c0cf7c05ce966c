import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from polylike import reference
from polylike.maps import (Family, MapSpecError, analytic_graph, map_spec_from_dict,
                           parse_map_spec, serialize_map_spec, validate_polynomial_like)

from conftest import poly

coord = st.complex_numbers(max_magnitude=2, allow_nan=False, allow_infinity=False)


def naive(f, z):
    """Independent monomial-sum evaluation."""
    def p(c, x):
        return sum(a * x**j for j, a in enumerate(c))
    if f.family is Family.POLY1D:
        return np.array([p(f.coeffs, z[0])])
    if f.family is Family.PRODUCT_POWER2D:
        d = f.degree
        if f.variant == "power":
            return np.array([z[0] ** d, z[1] ** d])
        return np.array([z[1] ** d, 2 * z[0]])
    r = [0, f.lam] if f.family is Family.SKEW2D else f.R
    return np.array([p(r, z[0]) + p(f.P, z[1]), p(f.Q, z[1])])


def test_topological_degrees(maps):
    assert poly(0, 0, 1).topological_degree == 2
    assert maps["skew"].topological_degree == 2
    assert maps["wd2z"].topological_degree == 3
    assert maps["torus"].topological_degree == 4


def test_eval_examples(maps):
    assert maps["doubling"].eval(np.array([[1 + 0j]]))[0, 0] == 1
    assert np.allclose(maps["skew"].eval(np.array([[1, 1]], dtype=complex)), [[5, 1]])
    cube = map_spec_from_dict({"family": "ProductPower2D", "degree": 3, "variant": "power"})
    assert np.allclose(cube.eval(np.array([[0, 2]], dtype=complex)), [[0, 8]])


def test_jacobian_examples(maps):
    assert maps["doubling"].jacobian(np.array([[3 + 0j]]))[0, 0, 0] == 6
    z = np.array([[0.3 - 1j, 0.7 + 0.2j]])
    J = maps["skew"].jacobian(z)[0]
    assert np.allclose(J, [[4, 2 * z[0, 1]], [0, 2 * z[0, 1]]])
    assert np.allclose(maps["torus"].jacobian(np.array([[1, 1]], dtype=complex))[0], np.diag([2, 2]))


def test_critical_sets(maps):
    assert np.allclose(maps["doubling"].critical_set().points, [0])
    assert maps["wd2z"].critical_set().lines == ((1, 0j),)
    assert maps["skew"].critical_set().lines == ((1, 0j),)


@pytest.mark.parametrize("name", reference.NAMES)
@given(st.lists(coord, min_size=2, max_size=2))
def test_eval_matches_naive(name, z):
    f = reference.load(name)
    z = np.array(z[: f.k], dtype=complex)
    got = f.eval(z[None, :])[0]
    want = naive(f, z)
    assert np.all(np.abs(got - want) <= 1e-12 * (1 + np.abs(want)))


@pytest.mark.parametrize("name", reference.NAMES)
def test_jacobian_matches_finite_differences(name, rng):
    f = reference.load(name)
    z = f.domain.sample_uniform(rng, 100) * 0.5
    J = f.jacobian(z)
    h = 1e-6
    for j in range(f.k):
        e = np.zeros(f.k)
        e[j] = h
        fd = (f.eval(z + e) - f.eval(z - e)) / (2 * h)
        assert np.allclose(J[:, :, j], fd, rtol=1e-6, atol=1e-6 * np.max(np.abs(J)))


def test_validation_examples(maps):
    assert validate_polynomial_like(maps["doubling"]).is_polynomial_like
    assert not validate_polynomial_like(poly(10, 0, 1, radius=2)).is_polynomial_like
    tor = map_spec_from_dict({"family": "ProductPower2D", "degree": 2, "variant": "power",
                              "domain": {"shape": "Polydisc", "center": [[0, 0], [0, 0]], "radii": [4, 4]}})
    rep = validate_polynomial_like(tor)
    assert rep.is_polynomial_like
    assert abs(rep.lojasiewicz_estimate[1] - 2) < 0.1
    assert validate_polynomial_like(maps["skew"]).is_polynomial_like


@pytest.mark.parametrize("name", reference.NAMES)
def test_reference_round_trip(name):
    f = reference.load(name)
    text = serialize_map_spec(f)
    assert serialize_map_spec(parse_map_spec(text)) == text
    assert parse_map_spec(text) == f


def test_strict_schema():
    with pytest.raises(MapSpecError):
        map_spec_from_dict({"family": "Poly1D", "coeffs": [[0, 0], [0, 0], [1, 0]], "colour": 1})
    with pytest.raises(MapSpecError):
        map_spec_from_dict({"family": "Poly1D", "coeffs": [[0, 0], [1, 0]]})
    with pytest.raises(MapSpecError):
        parse_map_spec("{not json")


def test_graph_examples(maps):
    p0 = maps["skew_p0"]
    assert np.all(analytic_graph(p0, np.array([0.3, -0.8j]))[0] == 0)
    h, _ = analytic_graph(maps["skew"], np.array([0j]))
    assert h[0] == 0
    h, bound = analytic_graph(maps["skew"], np.array([1 + 0j]))
    assert abs(h[0] + 1 / 3) <= bound + 1e-12


@given(st.floats(0, 2 * np.pi), st.floats(0, 1))
def test_graph_functional_equation(theta, r):
    f = reference.load("skew")
    z2 = np.array([r * np.exp(1j * theta)])
    h, bound = analytic_graph(f, z2)
    hq, bq = analytic_graph(f, z2**2)
    assert abs(hq[0] - (4 * h[0] + z2[0] ** 2)) <= 4 * bound + bq + 1e-12
