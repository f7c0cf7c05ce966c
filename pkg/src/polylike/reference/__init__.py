"""Reference maps shipped with the package, one JSON map spec per file."""
from importlib import resources

from ..maps import MapSpec, parse_map_spec

NAMES = ("doubling", "chebyshev", "skew", "skew_p0", "torus", "wd2z")


def load(name: str) -> MapSpec:
    if name not in NAMES:
        raise KeyError(f"unknown reference map {name!r}; choose from {', '.join(NAMES)}")
    return parse_map_spec(resources.files(__name__).joinpath(f"{name}.json").read_text())


def all_maps() -> dict:
    return {n: load(n) for n in NAMES}
