"""Polynomial-like map families, their domains, derivatives and validation."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .roots import aberth, derivative_coeffs, horner, trim


class MapSpecError(ValueError):
    """Map specification text does not satisfy the schema."""


class GraphDomainError(ValueError):
    """A forward orbit left the filled Julia set while summing the graph series."""


class Family(str, Enum):
    POLY1D = "Poly1D"
    SKEW2D = "Skew2D"
    PRODUCT_POWER2D = "ProductPower2D"
    TRIANGULAR2D = "Poly2DTriangularizable"


class Shape(str, Enum):
    BALL = "Ball"
    POLYDISC = "Polydisc"
    ANNULUS2D = "Annulus2D"


def escape_radius(coeffs) -> float:
    """Radius beyond which ``|p(z)| >= 2|z|``, so the orbit escapes."""
    c = trim(coeffs)
    lead = abs(c[-1])
    return max(1.0, (float(np.sum(np.abs(c[:-1]))) + 2.0) / lead)


@dataclass(frozen=True)
class Domain:
    """Ball, polydisc or product of annuli in C^k (k = 1 or 2).

    ``radii`` are outer radii (one value for a ball); ``inner`` holds the
    inner radii of an annulus, one per coordinate.
    """

    shape: Shape
    center: tuple
    radii: tuple
    inner: tuple | None = None

    def __post_init__(self):
        if any(r <= 0 for r in self.radii):
            raise MapSpecError("domain radii must be positive")
        if self.shape is Shape.BALL and len(self.radii) != 1:
            raise MapSpecError("a ball takes a single radius")
        if self.shape is not Shape.BALL and len(self.radii) != len(self.center):
            raise MapSpecError("one radius per coordinate is required")
        if self.shape is Shape.ANNULUS2D:
            if self.inner is None or len(self.inner) != len(self.radii):
                raise MapSpecError("annulus needs inner radii per coordinate")
            if any(not 0 < a < b for a, b in zip(self.inner, self.radii)):
                raise MapSpecError("annulus requires 0 < inner < outer")

    @property
    def k(self) -> int:
        return len(self.center)

    @property
    def outer_radius(self) -> float:
        return float(max(self.radii))

    @property
    def diameter(self) -> float:
        if self.shape is Shape.BALL:
            return 2.0 * self.radii[0]
        return 2.0 * math.sqrt(sum(r * r for r in self.radii))

    @property
    def volume(self) -> float:
        if self.shape is Shape.BALL:
            r = self.radii[0]
            return math.pi * r**2 if self.k == 1 else math.pi**2 * r**4 / 2.0
        if self.shape is Shape.POLYDISC:
            return math.prod(math.pi * r * r for r in self.radii)
        return math.prod(math.pi * (b * b - a * a) for a, b in zip(self.inner, self.radii))

    def gauge(self, z) -> np.ndarray:
        """Scaled distance to the boundary: < 1 inside, 1 on the boundary."""
        z = np.asarray(z, dtype=complex).reshape(-1, self.k)
        w = np.abs(z - np.asarray(self.center)[None, :])
        if self.shape is Shape.BALL:
            return np.sqrt(np.sum(w**2, axis=1)) / self.radii[0]
        g = w / np.asarray(self.radii)[None, :]
        if self.shape is Shape.ANNULUS2D:
            with np.errstate(divide="ignore"):
                g = np.maximum(g, np.asarray(self.inner)[None, :] / w)
        return np.max(g, axis=1)

    def contains(self, z, margin: float = 0.0) -> np.ndarray:
        return self.gauge(z) < 1.0 - margin

    def sample_uniform(self, rng, n: int) -> np.ndarray:
        c = np.asarray(self.center, dtype=complex)[None, :]
        if self.shape is Shape.BALL:
            if self.k == 1:
                r = self.radii[0] * np.sqrt(rng.random(n))
                return c + (r * np.exp(2j * np.pi * rng.random(n)))[:, None]
            g = rng.normal(size=(n, 4))
            g /= np.linalg.norm(g, axis=1, keepdims=True)
            r = self.radii[0] * rng.random(n) ** 0.25
            g *= r[:, None]
            return c + g[:, 0::2] + 1j * g[:, 1::2]
        lo = np.zeros(self.k) if self.inner is None else np.asarray(self.inner)
        hi = np.asarray(self.radii)
        u = rng.random((n, self.k))
        r = np.sqrt(lo**2 + u * (hi**2 - lo**2))
        return c + r * np.exp(2j * np.pi * rng.random((n, self.k)))

    def sample_boundary(self, rng, n: int) -> np.ndarray:
        c = np.asarray(self.center, dtype=complex)[None, :]
        if self.shape is Shape.BALL:
            if self.k == 1:
                return c + self.radii[0] * np.exp(2j * np.pi * rng.random((n, 1)))
            g = rng.normal(size=(n, 4))
            g *= self.radii[0] / np.linalg.norm(g, axis=1, keepdims=True)
            return c + g[:, 0::2] + 1j * g[:, 1::2]
        z = self.sample_uniform(rng, n) - c
        which = rng.integers(self.k, size=n)
        theta = np.exp(2j * np.pi * rng.random(n))
        rows = np.arange(n)
        if self.shape is Shape.POLYDISC:
            z[rows, which] = np.asarray(self.radii)[which] * theta
        else:
            outer = rng.random(n) < 0.5
            rad = np.where(outer, np.asarray(self.radii)[which], np.asarray(self.inner)[which])
            z[rows, which] = rad * theta
        return c + z

    def to_dict(self) -> dict:
        out = {"shape": self.shape.value,
               "center": [[float(np.real(x)), float(np.imag(x))] for x in self.center]}
        if self.shape is Shape.ANNULUS2D:
            out["radii"] = [[float(a), float(b)] for a, b in zip(self.inner, self.radii)]
        else:
            out["radii"] = [float(r) for r in self.radii]
        return out


@dataclass(frozen=True)
class CriticalSet:
    """Zero locus of det Df: isolated points (k=1) or lines {z_axis = value} (k=2)."""

    points: tuple = ()
    lines: tuple = ()


@dataclass(frozen=True)
class MapSpec:
    """A polynomial-like map f: U -> V with U = f^{-1}(V).

    Coefficient tuples are ascending in degree. For the triangular families
    ``f(z1, z2) = (R(z1) + P(z2), Q(z2))``; ``Skew2D`` is the case
    ``R(z1) = lam * z1``. ``ProductPower2D`` is ``(z^d, w^d)`` for variant
    ``"power"`` and ``(w^d, 2z)`` for variant ``"swap"``.
    """

    family: Family
    domain: Domain | None = None
    coeffs: tuple = ()
    lam: complex = 0j
    P: tuple = ()
    Q: tuple = ()
    R: tuple = ()
    degree: int = 0
    variant: str = "power"
    name: str = field(default="", compare=False)

    # -- derived data ------------------------------------------------------
    @property
    def dimension(self) -> int:
        return 1 if self.family is Family.POLY1D else 2

    k = dimension

    @property
    def r_coeffs(self) -> tuple:
        if self.family is Family.SKEW2D:
            return (0j, complex(self.lam))
        return self.R

    @property
    def is_triangular(self) -> bool:
        return self.family in (Family.SKEW2D, Family.TRIANGULAR2D)

    @property
    def topological_degree(self) -> int:
        if self.family is Family.POLY1D:
            return len(self.coeffs) - 1
        if self.is_triangular:
            return (len(self.r_coeffs) - 1) * (len(self.Q) - 1)
        return self.degree**2 if self.variant == "power" else self.degree

    @property
    def algebraic_degree(self) -> int:
        if self.family is Family.POLY1D:
            return len(self.coeffs) - 1
        if self.is_triangular:
            return max(len(self.r_coeffs), len(self.P), len(self.Q)) - 1
        return self.degree

    def with_domain(self, domain: Domain) -> "MapSpec":
        return MapSpec(self.family, domain, self.coeffs, self.lam, self.P, self.Q, self.R,
                       self.degree, self.variant, self.name)

    # -- evaluation --------------------------------------------------------
    def eval(self, z) -> np.ndarray:
        """Image of points ``z`` with shape (..., k)."""
        z = np.asarray(z, dtype=complex)
        if self.family is Family.POLY1D:
            return horner(self.coeffs, z[..., 0])[0][..., None]
        z1, z2 = z[..., 0], z[..., 1]
        if self.is_triangular:
            a = horner(self.r_coeffs, z1)[0] + horner(self.P, z2)[0]
            b = horner(self.Q, z2)[0]
        elif self.variant == "power":
            a, b = z1**self.degree, z2**self.degree
        else:
            a, b = z2**self.degree, 2 * z1
        return np.stack([a, b], axis=-1)

    __call__ = eval

    def jacobian(self, z) -> np.ndarray:
        """Complex derivative matrix Df(z), shape (..., k, k)."""
        z = np.asarray(z, dtype=complex)
        if self.family is Family.POLY1D:
            return horner(self.coeffs, z[..., 0])[1][..., None, None]
        z1, z2 = z[..., 0], z[..., 1]
        out = np.zeros(z.shape[:-1] + (2, 2), dtype=complex)
        d = self.degree
        if self.is_triangular:
            out[..., 0, 0] = horner(self.r_coeffs, z1)[1]
            out[..., 0, 1] = horner(self.P, z2)[1]
            out[..., 1, 1] = horner(self.Q, z2)[1]
        elif self.variant == "power":
            out[..., 0, 0] = d * z1 ** (d - 1)
            out[..., 1, 1] = d * z2 ** (d - 1)
        else:
            out[..., 0, 1] = d * z2 ** (d - 1)
            out[..., 1, 0] = 2.0
        return out

    def log_abs_det(self, z) -> np.ndarray:
        """``log|det Df|``; the real Jacobian is ``J = |det Df|^2``."""
        with np.errstate(divide="ignore"):
            return np.log(np.abs(np.linalg.det(self.jacobian(z))))

    def iterate(self, z, n: int) -> np.ndarray:
        for _ in range(n):
            z = self.eval(z)
        return z

    def critical_set(self) -> CriticalSet:
        if self.family is Family.POLY1D:
            return CriticalSet(points=tuple(_roots_of(derivative_coeffs(self.coeffs))))
        if self.is_triangular:
            lines = [(1, c) for c in _roots_of(derivative_coeffs(self.Q))]
            lines += [(0, c) for c in _roots_of(derivative_coeffs(self.r_coeffs))]
            return CriticalSet(lines=tuple(lines))
        if self.variant == "power":
            return CriticalSet(lines=((0, 0j), (1, 0j)))
        return CriticalSet(lines=((1, 0j),))

    # -- serialisation -----------------------------------------------------
    def to_dict(self) -> dict:
        out = {"family": self.family.value, "dimension": self.dimension}
        if self.name:
            out["name"] = self.name
        if self.family is Family.POLY1D:
            out["coeffs"] = _pairs(self.coeffs)
        elif self.family is Family.SKEW2D:
            out["lambda"] = [float(np.real(self.lam)), float(np.imag(self.lam))]
            out["P"] = _pairs(self.P)
            out["Q"] = _pairs(self.Q)
        elif self.family is Family.TRIANGULAR2D:
            out["R"] = _pairs(self.R)
            out["P"] = _pairs(self.P)
            out["Q"] = _pairs(self.Q)
        else:
            out["degree"] = self.degree
            out["variant"] = self.variant
        if self.domain is not None:
            out["domain"] = self.domain.to_dict()
        return out


def _roots_of(coeffs):
    c = trim(coeffs)
    if len(c) <= 1:
        return []
    return list(aberth(c))


def _pairs(coeffs):
    return [[float(np.real(c)), float(np.imag(c))] for c in coeffs]


# -- parsing -------------------------------------------------------------------

_FAMILY_KEYS = {
    Family.POLY1D: {"coeffs"},
    Family.SKEW2D: {"lambda", "P", "Q"},
    Family.TRIANGULAR2D: {"R", "P", "Q"},
    Family.PRODUCT_POWER2D: {"degree", "variant"},
}


def _complex(value, what):
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return complex(value)
    if (isinstance(value, (list, tuple)) and len(value) == 2
            and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value)):
        return complex(float(value[0]), float(value[1]))
    raise MapSpecError(f"{what}: expected [re, im], got {value!r}")


def _poly(value, what, allow_constant=False):
    if not isinstance(value, list) or not value:
        raise MapSpecError(f"{what}: expected a nonempty list of [re, im] coefficients")
    coeffs = tuple(_complex(v, what) for v in value)
    if coeffs[-1] == 0:
        raise MapSpecError(f"{what}: zero leading coefficient")
    if len(coeffs) < 2 and not allow_constant:
        raise MapSpecError(f"{what}: degree must be at least 1")
    return coeffs


def domain_from_dict(obj, k) -> Domain:
    if not isinstance(obj, dict) or set(obj) != {"shape", "center", "radii"}:
        raise MapSpecError("domain must have exactly the fields shape, center, radii")
    try:
        shape = Shape(obj["shape"])
    except ValueError:
        raise MapSpecError(f"unsupported domain shape {obj['shape']!r}") from None
    center = obj["center"]
    if not isinstance(center, list) or len(center) != k:
        raise MapSpecError(f"domain center must list {k} coordinates")
    center = tuple(_complex(c, "domain.center") for c in center)
    radii = obj["radii"]
    if not isinstance(radii, list):
        raise MapSpecError("domain radii must be a list")
    if shape is Shape.ANNULUS2D:
        if k != 2 or len(radii) != 2 or not all(isinstance(r, list) and len(r) == 2 for r in radii):
            raise MapSpecError("Annulus2D radii must be [[inner, outer], [inner, outer]]")
        return Domain(shape, center, tuple(float(r[1]) for r in radii),
                      tuple(float(r[0]) for r in radii))
    if not all(isinstance(r, (int, float)) and not isinstance(r, bool) for r in radii):
        raise MapSpecError("domain radii must be numbers")
    return Domain(shape, center, tuple(float(r) for r in radii))


def map_spec_from_dict(obj: dict, auto_domain: bool = True) -> MapSpec:
    if not isinstance(obj, dict):
        raise MapSpecError("map spec must be an object")
    try:
        family = Family(obj.get("family"))
    except ValueError:
        raise MapSpecError(f"unsupported family {obj.get('family')!r}") from None
    allowed = {"family", "dimension", "domain", "name"} | _FAMILY_KEYS[family]
    unknown = set(obj) - allowed
    if unknown:
        raise MapSpecError(f"unknown fields for {family.value}: {sorted(unknown)}")
    missing = _FAMILY_KEYS[family] - set(obj)
    if missing:
        raise MapSpecError(f"missing fields for {family.value}: {sorted(missing)}")
    k = 1 if family is Family.POLY1D else 2
    if "dimension" in obj and obj["dimension"] != k:
        raise MapSpecError(f"{family.value} has dimension {k}")
    name = obj.get("name", "")

    kw = {}
    if family is Family.POLY1D:
        kw["coeffs"] = _poly(obj["coeffs"], "coeffs")
    elif family is Family.SKEW2D:
        kw["lam"] = _complex(obj["lambda"], "lambda")
        if kw["lam"] == 0:
            raise MapSpecError("lambda must be nonzero")
        kw["P"] = _poly(obj["P"], "P", allow_constant=True) if obj["P"] != [[0, 0]] else (0j,)
        kw["Q"] = _poly(obj["Q"], "Q")
    elif family is Family.TRIANGULAR2D:
        kw["R"] = _poly(obj["R"], "R")
        kw["P"] = _poly(obj["P"], "P", allow_constant=True) if obj["P"] != [[0, 0]] else (0j,)
        kw["Q"] = _poly(obj["Q"], "Q")
    else:
        d = obj["degree"]
        if not isinstance(d, int) or isinstance(d, bool) or d < 2:
            raise MapSpecError("degree must be an integer >= 2")
        if obj["variant"] not in ("power", "swap"):
            raise MapSpecError("variant must be 'power' or 'swap'")
        kw["degree"] = d
        kw["variant"] = obj["variant"]

    spec = MapSpec(family, None, name=name, **kw)
    if spec.topological_degree < 2:
        raise MapSpecError("topological degree must be at least 2")
    if "domain" in obj:
        spec = spec.with_domain(domain_from_dict(obj["domain"], k))
    elif auto_domain:
        spec = spec.with_domain(default_domain(spec))
    return spec


def parse_map_spec(text: str) -> MapSpec:
    """Parse map-spec JSON text into a validated :class:`MapSpec`."""
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MapSpecError(f"invalid JSON: {exc}") from None
    return map_spec_from_dict(obj)


def serialize_map_spec(spec: MapSpec) -> str:
    """Canonical JSON text; ``serialize(parse(text)) == text`` on canonical input."""
    return json.dumps(spec.to_dict(), indent=2) + "\n"


# -- validation ----------------------------------------------------------------

@dataclass
class ValidationReport:
    is_polynomial_like: bool
    max_preimage_radius: float
    margin: float
    lojasiewicz_estimate: tuple
    max_gauge: float = float("nan")
    diameter_K: float = float("nan")
    boundary_distance: float = float("nan")


def validate_polynomial_like(f: MapSpec, V: Domain | None = None, boundary_samples: int = 64,
                             seed: int = 0, rel_margin: float = 1e-3) -> ValidationReport:
    """Check U = f^{-1}(V) is relatively compact in V by solving fibers over sampled boundary points.

    The preimage radius is reported on the scale of V's outer radius (for a
    ball it is the largest ``|w - center|``). The Lojasiewicz pair (lam, l) is a
    log-log fit of ``min |f(z)|`` over directions against ``|z|`` on large
    spheres.
    """
    from .preimage import fiber_points  # deferred: preimage imports this module

    if boundary_samples < 16:
        raise ValueError("boundary_samples must be at least 16")
    V = V or f.domain
    rng = np.random.default_rng(seed)
    targets = V.sample_boundary(rng, boundary_samples)
    pts = fiber_points(f, targets)                       # (B, d_t, k)
    g = V.gauge(pts.reshape(-1, f.k))
    max_gauge = float(np.max(g))
    R = V.outer_radius
    ok = bool(max_gauge < 1.0 - rel_margin)

    # Lojasiewicz exponent from the lower envelope on large spheres
    radii = R * 2.0 ** np.arange(1, 9)
    envelope = []
    for r in radii:
        u = rng.normal(size=(256, 2 * f.k))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        z = r * (u[:, 0::2] + 1j * u[:, 1::2])
        envelope.append(np.min(np.linalg.norm(f.eval(z), axis=1)))
    slope, icpt = np.polyfit(np.log(radii), np.log(envelope), 1)

    # K-diameter vs distance to the boundary of U (surfaced, not judged)
    cloud = pts.reshape(-1, f.k)
    return ValidationReport(
        is_polynomial_like=ok,
        max_preimage_radius=max_gauge * R,
        margin=(1.0 - max_gauge) * R,
        lojasiewicz_estimate=(float(np.exp(icpt)), float(slope)),
        max_gauge=max_gauge,
        diameter_K=float(np.max(np.linalg.norm(cloud - cloud.mean(axis=0), axis=1)) * 2),
        boundary_distance=(1.0 - max_gauge) * R,
    )


def default_domain(f: MapSpec) -> Domain:
    """Smallest ball/polydisc of radius 2^j (j = 1..10) on which f validates."""
    if f.family is Family.PRODUCT_POWER2D:
        if f.variant == "power":
            r = 2.0**f.degree
            return Domain(Shape.ANNULUS2D, (0j, 0j), (r, r), (1 / r, 1 / r))
        return Domain(Shape.POLYDISC, (0j, 0j), (4.0, 4.0))
    for j in range(1, 11):
        R = 2.0**j
        if f.k == 1:
            V = Domain(Shape.BALL, (0j,), (R,))
        else:
            V = Domain(Shape.POLYDISC, (0j, 0j), (R, R))
        if validate_polynomial_like(f, V).is_polynomial_like:
            return V
    raise MapSpecError("no radius 2^j (j <= 10) makes the map polynomial-like")


# -- skew-product graph --------------------------------------------------------

def graph_truncation(f: MapSpec, tol: float = 1e-10) -> int:
    lam = abs(f.lam)
    sup_p = _sup_P_on_KQ(f)
    if sup_p == 0:
        return 0
    return max(1, math.ceil(math.log(tol * (lam - 1) / sup_p) / math.log(1 / lam)))


def _sup_P_on_KQ(f: MapSpec) -> float:
    r = escape_radius(f.Q)
    return float(sum(abs(c) * r**j for j, c in enumerate(f.P)))


def analytic_graph(f: MapSpec, z2, N: int | None = None, tol: float = 1e-10):
    """Truncated graph ``h_N(z2) = -sum_{j=1..N} lam^-j P(Q^{j-1}(z2))``.

    Returns ``(h, bound)`` where ``bound`` is the truncation error bound
    ``sup|P on K_Q| |lam|^-N / (|lam| - 1)``.
    """
    if f.family is not Family.SKEW2D:
        raise ValueError("analytic_graph needs a Skew2D map")
    lam = complex(f.lam)
    if abs(lam) <= 1:
        raise ValueError("the graph series needs |lambda| > 1")
    if N is None:
        N = graph_truncation(f, tol)
    z = np.asarray(z2, dtype=complex)
    r_esc = escape_radius(f.Q)
    h = np.zeros_like(z)
    w = z.copy()
    for j in range(1, N + 1):
        if np.any(np.abs(w) > r_esc):
            raise GraphDomainError("orbit of z2 escapes: z2 is not in the filled Julia set of Q")
        h -= lam ** (-j) * horner(f.P, w)[0]
        w = horner(f.Q, w)[0]
    bound = _sup_P_on_KQ(f) * abs(lam) ** (-N) / (abs(lam) - 1)
    return h, bound
