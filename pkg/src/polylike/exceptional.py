"""Fiber counts inside an algebraic set X, the ratio tau_X, and totally-invariant verdicts.

X is a finite union of components, each a point or (in C^2) an affine line
a*z1 + b*z2 = c. Membership of w is |defining equation| <= tol*(1 + |w|).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .maps import MapSpec
from .preimage import DEFAULT_CAP, FiberCapExceeded, fiber_points, _cluster_tol, _merge_rows


@dataclass(frozen=True)
class Point:
    at: tuple

    def residual(self, w):
        return np.max(np.abs(w - np.asarray(self.at, dtype=complex)[None, :]), axis=1)


@dataclass(frozen=True)
class Line:
    """Affine line ``coef[0] * z1 + coef[1] * z2 = value`` in C^2."""

    coef: tuple
    value: complex = 0j

    @classmethod
    def axis(cls, axis: int, value: complex = 0j) -> "Line":
        """{z_axis = value}."""
        return cls((1, 0) if axis == 0 else (0, 1), value)

    def __post_init__(self):
        if not np.any(np.asarray(self.coef, dtype=complex)):
            raise ValueError("line coefficients must not all vanish")

    def residual(self, w):
        a = np.asarray(self.coef, dtype=complex)
        top = np.max(np.abs(a))     # rescale first so tiny or huge coefficients keep a finite norm
        return np.abs(w @ (a / top) - self.value / top) / np.linalg.norm(a / top)

    def parametrize(self, t):
        # points on the line with free parameter t (complex array)
        a, b = (complex(x) for x in self.coef)
        t = np.asarray(t, dtype=complex)
        if abs(b) >= abs(a):
            return np.stack([t, (self.value - a * t) / b], axis=1)
        return np.stack([(self.value - b * t) / a, t], axis=1)


@dataclass(frozen=True)
class AlgebraicSet:
    components: tuple

    def distance(self, w) -> np.ndarray:
        w = np.atleast_2d(np.asarray(w, dtype=complex))
        return np.min(np.stack([c.residual(w) for c in self.components]), axis=0)

    def contains(self, w, tol: float) -> np.ndarray:
        w = np.atleast_2d(np.asarray(w, dtype=complex))
        return self.distance(w) <= tol * (1 + np.linalg.norm(w, axis=1))


@dataclass
class FiberCountSeries:
    z: np.ndarray
    counts: list                 # N^n_X(z) for n = 0..n_max, integers with multiplicity
    degree: int
    min_outside_distance: list = field(default_factory=list)   # per level, closest rejected point

    @property
    def ratios(self) -> list:
        return [c / self.degree**n for n, c in enumerate(self.counts)]

    @property
    def tau(self) -> float:
        return self.ratios[-1]

    def monotone(self) -> bool:
        """Exact check N^{n+1} <= d_t N^n (ratios nonincreasing)."""
        return all(b <= self.degree * a for a, b in zip(self.counts, self.counts[1:]))

    def first_drop(self):
        for n, c in enumerate(self.counts):
            if c < self.degree**n:
                return n
        return None


def fiber_count_in_X(f: MapSpec, X: AlgebraicSet, z, n_max: int, tol: float = 1e-8,
                     cap: int = DEFAULT_CAP) -> FiberCountSeries:
    """N^n_X(z) = #{w in f^-n(z) : f^i(w) in X for i = 0..n} with multiplicity.

    Computed level by level as f^-1(F^{n-1}) intersected with X.
    """
    dt = f.topological_degree
    if dt**n_max > cap:
        raise FiberCapExceeded(f"fiber size d_t^n = {dt}^{n_max} exceeds cap {cap}")
    z = np.asarray(z, dtype=complex).reshape(f.k)
    out = FiberCountSeries(z, [], dt)
    if not X.contains(z, tol)[0]:
        out.counts = [0] * (n_max + 1)
        out.min_outside_distance = [float(X.distance(z)[0])] + [float("nan")] * n_max
        return out
    pts = z[None, :]
    mult = np.ones(1, dtype=np.int64)
    out.counts.append(1)
    out.min_outside_distance.append(float("nan"))
    for _ in range(n_max):
        if len(pts) == 0:
            out.counts.append(0)
            out.min_outside_distance.append(float("nan"))
            continue
        slots = fiber_points(f, pts)
        rep, m = _merge_rows(slots, _cluster_tol(pts))
        m = m * mult[:, None]
        keep = m > 0
        rep, m = rep[keep], m[keep]
        inside = X.contains(rep, tol)
        rejected = rep[~inside]
        out.min_outside_distance.append(float(X.distance(rejected).min()) if len(rejected) else float("nan"))
        pts, mult = rep[inside], m[inside]
        out.counts.append(int(mult.sum()))
    return out


@dataclass
class Verdict:
    probe: np.ndarray
    member: bool
    drop_n: int | None
    series: FiberCountSeries

    @property
    def label(self) -> str:
        return "MEMBER" if self.member else "NONMEMBER"


def sample_on(X: AlgebraicSet, f: MapSpec, count: int, rng, shrink: float = 0.9) -> np.ndarray:
    """Probe points on X inside V, cycling through its components."""
    out = []
    R = shrink * f.domain.outer_radius
    comps = X.components
    for i in range(count):
        c = comps[i % len(comps)]
        if isinstance(c, Point):
            out.append(np.asarray(c.at, dtype=complex))
            continue
        for _ in range(1000):
            t = R * np.sqrt(rng.random()) * np.exp(2j * np.pi * rng.random())
            p = c.parametrize(np.array([t]))[0]
            if f.domain.contains(p[None, :], margin=1 - shrink)[0]:
                break
        else:
            raise ValueError("could not place a probe on the line inside V")
        out.append(p)
    return np.array(out).reshape(count, f.k)


def invariance_verdict(f: MapSpec, X: AlgebraicSet, probes, n_max: int, seed=0,
                       tol: float = 1e-8) -> list:
    """MEMBER if N^n = d_t^n for every n <= n_max, otherwise NONMEMBER with the drop level.

    ``probes`` is a count (points are sampled on X) or an explicit array.
    """
    if np.isscalar(probes):
        probes = sample_on(X, f, int(probes), np.random.default_rng(seed))
    probes = np.asarray(probes, dtype=complex).reshape(-1, f.k)
    out = []
    for p in probes:
        s = fiber_count_in_X(f, X, p, n_max, tol)
        drop = s.first_drop()
        out.append(Verdict(p, drop is None, drop, s))
    return out


def verdict_rows(verdicts):
    """CSV rows ``probe_re..., probe_im..., n, count, ratio, verdict``."""
    rows = []
    for v in verdicts:
        head = [f"{x.real:.17g}" for x in v.probe] + [f"{x.imag:.17g}" for x in v.probe]
        for n, (c, r) in enumerate(zip(v.series.counts, v.series.ratios)):
            rows.append(head + [str(n), str(c), f"{r:.17g}", v.label])
    return rows
