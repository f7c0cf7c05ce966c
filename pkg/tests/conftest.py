import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from polylike import reference
from polylike.maps import map_spec_from_dict
from polylike.measure import sample_equilibrium

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def poly(*coeffs, radius=None):
    """Poly1D spec from ascending complex coefficients."""
    obj = {"family": "Poly1D", "coeffs": [[c.real, c.imag] for c in map(complex, coeffs)]}
    if radius is not None:
        obj["domain"] = {"shape": "Ball", "center": [[0, 0]], "radii": [radius]}
    return map_spec_from_dict(obj)


@pytest.fixture(scope="session")
def maps():
    return reference.all_maps()


@pytest.fixture(scope="session")
def clouds(maps):
    return {name: sample_equilibrium(f, 100, per_walker=100, seed=11) for name, f in maps.items()}


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_log():
    """Record one PASS/FAIL line per acceptance criterion; printed at the end of the run."""
    def log(number, ok, detail, elapsed):
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  ({elapsed:.1f}s)  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return log


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
