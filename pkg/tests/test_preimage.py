import numpy as np
import pytest
from hypothesis import given, strategies as st

from polylike import reference
from polylike.maps import map_spec_from_dict
from polylike.measure import transfer_apply
from polylike.preimage import (FiberCapExceeded, fiber, iterated_fiber, pullback_points,
                               random_preimage, random_preimages)

from conftest import poly

target = st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False)


def as_set(points):
    return sorted((round(p.real, 9), round(p.imag, 9)) for p in np.ravel(points))


def test_fiber_examples(maps):
    ps = fiber(maps["doubling"], [1])
    assert as_set(ps.points) == [(-1, 0), (1, 0)] and list(ps.multiplicities) == [1, 1]
    ps = fiber(maps["doubling"], [0])
    assert len(ps) == 1 and ps.multiplicities[0] == 2 and abs(ps.points[0, 0]) < 1e-12
    skew2 = map_spec_from_dict({"family": "Skew2D", "lambda": [2, 0], "P": [[0, 0], [0, 0], [1, 0]],
                                "Q": [[0, 0], [0, 0], [1, 0]]})
    ps = fiber(skew2, [2, 1])
    got = sorted((round(p[0].real, 9), round(p[1].real, 9)) for p in ps.points)
    assert got == [(0.5, -1), (0.5, 1)]


def test_iterated_fiber_examples(maps):
    ps = iterated_fiber(maps["doubling"], [1], 2)
    assert np.allclose(np.sort_complex(ps.points[:, 0] ** 4), np.ones(4))
    ps0 = iterated_fiber(maps["skew"], [0.3, 0.1], 0)
    assert len(ps0) == 1 and ps0.total == 1
    ps = iterated_fiber(maps["wd2z"], [1, 0], 1)
    assert len(ps) == 3
    assert np.allclose(ps.points[:, 0], 0) and np.allclose(ps.points[:, 1] ** 3, 1)


@pytest.mark.parametrize("name", reference.NAMES)
@given(st.lists(target, min_size=2, max_size=2))
def test_fiber_total_is_exact(name, z):
    f = reference.load(name)
    z = np.array(z[: f.k])
    if f.family.value == "ProductPower2D" and f.variant == "power" and np.any(z == 0):
        z = z + 0.1
    ps = fiber(f, z)
    assert ps.total == f.topological_degree
    res = np.max(np.abs(f.eval(ps.points) - z[None, :]))
    assert res <= 1e-9 * (1 + np.linalg.norm(z))


def test_fiber_cap():
    with pytest.raises(FiberCapExceeded, match="cap"):
        iterated_fiber(reference.load("wd2z"), [1, 1], 12, cap=1000)
    with pytest.raises(FiberCapExceeded):
        pullback_points(reference.load("doubling"), [1], 30)


def test_random_preimage_of_critical_value(rng):
    f = reference.load("doubling")
    assert all(random_preimage(f, [0], rng)[0] == 0 for _ in range(20))


def test_random_preimage_is_fair(rng):
    f = reference.load("doubling")
    draws = random_preimages(f, np.ones((10**5, 1)), rng)[:, 0]
    p = np.mean(draws.real > 0)
    assert abs(p - 0.5) < 3 * np.sqrt(0.25 / 10**5)


def test_random_preimage_torus_uniform(rng):
    f = reference.load("torus")
    draws = random_preimages(f, np.ones((40000, 2)), rng)
    signs = (draws.real > 0).astype(int) @ [2, 1]
    freq = np.bincount(signs, minlength=4) / len(signs)
    assert np.all(np.abs(freq - 0.25) < 3 * np.sqrt(0.25 * 0.75 / len(signs)))


@given(target)
def test_fiber_sum_matches_transfer(z):
    f = poly(-0.3j, 0, 1, radius=4)
    phi = lambda w: np.real(w[:, 0]) ** 2 + np.imag(w[:, 0])
    ps = fiber(f, [z])
    direct = np.sum(ps.multiplicities * phi(ps.points)) / 2
    assert abs(direct - transfer_apply(f, phi, [z])) < 1e-9 * (1 + abs(direct))
