import numpy as np
from hypothesis import given, strategies as st

from polylike.roots import aberth, compose_coeffs, derivative_coeffs, horner, trim

cplx = st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False)


def test_horner_value_and_derivative():
    p, dp = horner(np.array([1, 0, 2], dtype=complex), np.array([3.0 + 0j]))
    assert p[0] == 19 and dp[0] == 12


def test_aberth_roots_of_unity():
    r = aberth(np.array([-1, 0, 0, 0, 0, 1], dtype=complex))
    assert np.allclose(np.sort_complex(r ** 5), np.ones(5))
    assert np.allclose(np.abs(r), 1)


@given(st.lists(cplx, min_size=1, max_size=8))
def test_aberth_recovers_random_roots(roots):
    c = np.poly(roots)[::-1].astype(complex)
    got = aberth(c)
    assert len(got) == len(roots)
    # every true root has a computed root nearby (cluster-aware tolerance)
    for z in roots:
        assert np.min(np.abs(got - z)) < 1e-4 * (1 + abs(z)) or np.min(np.abs(horner(c, got)[0])) < 1e-8


def test_compose_and_derivative():
    sq = np.array([0, 0, 1], dtype=complex)
    assert np.allclose(trim(compose_coeffs(sq, sq)), [0, 0, 0, 0, 1])
    assert np.allclose(derivative_coeffs(np.array([5, 3, 2], dtype=complex)), [3, 4])


@given(cplx, st.lists(cplx, min_size=2, max_size=4), st.lists(cplx, min_size=2, max_size=4))
def test_composition_matches_evaluation(z, a, b):
    a, b = np.array(a, dtype=complex), np.array(b, dtype=complex)
    lhs = horner(compose_coeffs(a, b), np.array([z]))[0][0]
    rhs = horner(a, horner(b, np.array([z]))[0])[0][0]
    assert abs(lhs - rhs) <= 1e-9 * (1 + abs(rhs))
