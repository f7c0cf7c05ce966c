"""Monte-Carlo dynamical degrees, critical volume and the PLB decay series.

With the Euclidean Kaehler form, the degree-l integrand of (f^n)^* is the
l-th elementary symmetric function of the squared singular values of
D(f^n): l = 1 gives ||D f^n||_F^2 (so d_{1,0} = 2 vol U in C^2) and l = k
gives |det D f^n|^2 (so d_{k,n} = d_t^n vol U).

U_{-n-1} = {z : f^j(z) in V, j <= n+1} shrinks geometrically, so plain
rejection from U stops working after a few steps. Families with explicit
inverse structure get an envelope proposal that covers U_{-n-1} tightly:
triangular maps with affine first coordinate (exact z1-disc given z2) and
monomial product maps (exact modulus intervals per coordinate).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._parallel import as_seed, map_chunks
from .maps import Family, MapSpec, Shape
from .measure import DecaySeries, fit_decay
from .preimage import pullback_points
from .roots import horner

MIN_ACCEPTANCE = 1e-4
SAMPLE_CHUNK = 8192


class AcceptanceTooLow(RuntimeError):
    """Rejection sampling of U_{-n-1} accepted too few proposals."""


@dataclass
class DegreeTable:
    l: int
    rows: list = field(default_factory=list)    # (n, estimate, stderr, samples)
    growth_rate: float = float("nan")
    growth_stderr: float = float("nan")

    def csv_rows(self):
        return [(self.l, n, est, se, m) for n, est, se, m in self.rows]


@dataclass
class Envelope:
    """Proposal law on a set containing the integration domain, with constant volume."""

    volume: float
    sample: object      # (rng, m) -> (m, k) points


# -- envelopes -----------------------------------------------------------------

def _uniform_disc(rng, m, center, radius):
    r = radius * np.sqrt(rng.random(m))
    return center + r * np.exp(2j * np.pi * rng.random(m))


def _q_bounding_disc(f: MapSpec, depth: int, samples: int = 256):
    # disc containing {z2 : Q^j(z2) in D2, j <= depth}, from preimages of the boundary circle
    V = f.domain
    c2, R2 = V.center[1], V.radii[1]
    if depth == 0:
        return c2, R2
    from .maps import Domain
    q = MapSpec(Family.POLY1D, Domain(Shape.BALL, (c2,), (R2,)), coeffs=tuple(f.Q))
    theta = np.exp(2j * np.pi * (np.arange(samples) + 0.5) / samples)
    edge = (c2 + R2 * theta)[:, None]
    pts = pullback_points(q, edge, depth, cap=10**7).reshape(-1)
    center = np.mean(pts)
    radius = float(np.max(np.abs(pts - center)))
    return center, min(1.02 * radius + 1e-12, R2 + abs(center - c2))


def _affine_slice(f: MapSpec, z2, m_steps: int):
    # for f = (lam z1 + P'(z2), Q(z2)): the z1 disc where f^j(z)_1 in D1 is tightest
    r0, lam = f.r_coeffs
    V = f.domain
    c1, R1 = V.center[0], V.radii[0]
    best_j = int(np.argmin([abs(lam) ** -j for j in range(m_steps + 1)]))
    t = np.zeros_like(z2)
    w = z2.copy()
    for i in range(best_j):
        t = lam * t + horner(f.P, w)[0] + r0
        w = horner(f.Q, w)[0]
    return (c1 - t) / lam**best_j, R1 / abs(lam) ** best_j


def _triangular_envelope(f: MapSpec, m_steps: int, line=None) -> Envelope:
    if line is not None:
        axis, value = line
        if axis != 1:
            return None
        z2c = np.array([value])

        def sample_line(rng, m):
            cen, rad = _affine_slice(f, z2c, m_steps)
            z1 = _uniform_disc(rng, m, cen[0], rad)
            return np.stack([z1, np.full(m, value, dtype=complex)], axis=1)
        _, rad = _affine_slice(f, z2c, m_steps)
        return Envelope(math.pi * rad**2, sample_line)

    c2, r2 = _q_bounding_disc(f, m_steps)
    _, rad1 = _affine_slice(f, np.zeros(1, complex), m_steps)

    def sample(rng, m):
        z2 = _uniform_disc(rng, m, c2, r2)
        cen, rad = _affine_slice(f, z2, m_steps)
        z1 = cen + rad * np.sqrt(rng.random(m)) * np.exp(2j * np.pi * rng.random(m))
        return np.stack([z1, z2], axis=1)
    return Envelope(math.pi * r2**2 * math.pi * rad1**2, sample)


def _monomial_intervals(f: MapSpec, m_steps: int):
    # f^j(z)_i = C * z_t^e; intersect the modulus constraints from V over j <= m_steps
    V = f.domain
    d = f.degree
    inner = np.zeros(2) if V.inner is None else np.asarray(V.inner, dtype=float)
    outer = np.asarray(V.radii, dtype=float)
    lo = np.log(np.maximum(inner, 1e-300))
    lo[inner == 0] = -np.inf
    hi = np.log(outer)
    bounds = [[-np.inf, np.inf], [-np.inf, np.inf]]       # log-modulus per source coordinate
    chains = [(0.0, 1, 0), (0.0, 1, 1)]                   # (log C, exponent, source)
    for j in range(m_steps + 1):
        for i, (logc, e, t) in enumerate(chains):
            bounds[t][0] = max(bounds[t][0], (lo[i] - logc) / e)
            bounds[t][1] = min(bounds[t][1], (hi[i] - logc) / e)
        if f.variant == "power":
            chains = [(d * c, d * e, t) for c, e, t in chains]
        else:
            (c0, e0, t0), (c1, e1, t1) = chains
            chains = [(d * c1, d * e1, t1), (math.log(2) + c0, e0, t0)]
    return [(math.exp(a) if a > -np.inf else 0.0, math.exp(b)) for a, b in bounds]


def _annulus_area(a, b):
    return math.pi * max(b * b - a * a, 0.0)


def _uniform_annulus(rng, m, a, b):
    r = np.sqrt(a * a + rng.random(m) * (b * b - a * a))
    return r * np.exp(2j * np.pi * rng.random(m))


def _monomial_envelope(f: MapSpec, m_steps: int, line=None) -> Envelope:
    iv = _monomial_intervals(f, m_steps)
    if line is not None:
        axis, value = line
        free = 1 - axis
        a, b = iv[axis]
        if not (abs(value) < b and (abs(value) > a or a == 0)):
            return Envelope(0.0, None)

        def sample_line(rng, m):
            out = np.empty((m, 2), dtype=complex)
            out[:, axis] = value
            out[:, free] = _uniform_annulus(rng, m, *iv[free])
            return out
        return Envelope(_annulus_area(*iv[free]), sample_line)

    def sample(rng, m):
        return np.stack([_uniform_annulus(rng, m, *iv[0]), _uniform_annulus(rng, m, *iv[1])], axis=1)
    return Envelope(_annulus_area(*iv[0]) * _annulus_area(*iv[1]), sample)


def _plain_envelope(f: MapSpec, line=None) -> Envelope:
    V = f.domain
    if line is None:
        return Envelope(V.volume, lambda rng, m: V.sample_uniform(rng, m))
    axis, value = line
    free = 1 - axis
    if V.shape is Shape.BALL:
        rest = V.radii[0] ** 2 - abs(value - V.center[axis]) ** 2
        if rest <= 0:
            return Envelope(0.0, None)
        a, b = 0.0, math.sqrt(rest)
    else:
        a = 0.0 if V.inner is None else V.inner[free]
        b = V.radii[free]

    def sample(rng, m):
        out = np.empty((m, 2), dtype=complex)
        out[:, axis] = value
        out[:, free] = V.center[free] + _uniform_annulus(rng, m, a, b)
        return out
    return Envelope(_annulus_area(a, b), sample)


def envelope(f: MapSpec, n: int, proposal: str = "auto", line=None) -> Envelope:
    """Proposal for U_{-n-1} (or its slice along a critical line)."""
    m_steps = n + 1
    if proposal == "U":
        return _plain_envelope(f, line)
    if proposal not in ("auto", "envelope"):
        raise ValueError(f"unknown proposal {proposal!r}")
    if f.is_triangular and _has_envelope(f):
        env = _triangular_envelope(f, m_steps, line)
        if env is not None:
            return env
    if f.family is Family.PRODUCT_POWER2D and _has_envelope(f):
        return _monomial_envelope(f, m_steps, line)
    return _plain_envelope(f, line)


def _has_envelope(f: MapSpec) -> bool:
    if f.is_triangular:
        return len(f.r_coeffs) == 2 and f.domain.shape is Shape.POLYDISC
    if f.family is Family.PRODUCT_POWER2D:
        return all(c == 0 for c in f.domain.center) and f.domain.shape is not Shape.BALL
    return False


# -- integrands ----------------------------------------------------------------

def _survive_and_jacobian(f: MapSpec, z, n: int):
    # membership in U_{-n-1} and D(f^n), accumulated together
    ok = f.domain.contains(z)
    A = np.broadcast_to(np.eye(f.k, dtype=complex), (len(z), f.k, f.k)).copy()
    w = z
    with np.errstate(all="ignore"):
        for j in range(n + 1):
            if j < n:
                A = f.jacobian(w) @ A
            w = f.eval(w)
            ok &= f.domain.contains(w)
    return ok, A


def _integrand(A, l):
    if l == A.shape[-1]:
        return np.abs(np.linalg.det(A)) ** 2
    if l == 1:
        return np.sum(np.abs(A) ** 2, axis=(-2, -1))
    raise ValueError("degree order must be 1 or k")


def _estimate(f, env, n, samples, seed, workers, integrand, check_acceptance):
    if env.sample is None or env.volume == 0:
        return 0.0, 0.0, 0.0

    def run(a, b, rng):
        z = env.sample(rng, b - a)
        ok, A = _survive_and_jacobian(f, z, n)
        A[~ok] = 0          # escaped orbits can carry overflowed entries
        vals = np.where(ok, integrand(A), 0.0)
        return np.sum(vals), np.sum(vals**2), int(ok.sum())

    parts = map_chunks(run, samples, SAMPLE_CHUNK, seed, workers)
    s1 = sum(p[0] for p in parts)
    s2 = sum(p[1] for p in parts)
    acc = sum(p[2] for p in parts) / samples
    if check_acceptance and acc < MIN_ACCEPTANCE:
        raise AcceptanceTooLow(f"acceptance {acc:.2e} below {MIN_ACCEPTANCE:g} at n={n}; "
                               "use the auto proposal or fewer iterations")
    mean = s1 / samples
    var = max(s2 / samples - mean**2, 0.0)
    return env.volume * mean, env.volume * math.sqrt(var / max(samples - 1, 1)), acc


def _estimate_pullback(f, n, l, samples, seed, workers):
    # change of variables z = g(y), y uniform on U, g a random n-step inverse branch:
    # int_{U_{-n-1}} e_l(D f^n) = d_t^n vol(U) E[e_l(A) / |det A|^2],  A = D f^n(z)
    from .preimage import random_preimages

    V = f.domain

    def run(a, b, rng):
        y = V.sample_uniform(rng, b - a)
        in_u = V.contains(f.eval(y))
        z = y
        A = np.broadcast_to(np.eye(f.k, dtype=complex), (len(y), f.k, f.k)).copy()
        with np.errstate(all="ignore"):
            for _ in range(n):
                z = random_preimages(f, z, rng)
                A = A @ f.jacobian(z)
            ratio = _integrand(A, l) / np.abs(np.linalg.det(A)) ** 2
        vals = np.where(in_u & np.isfinite(ratio), ratio, 0.0)
        return np.sum(vals), np.sum(vals**2), int(in_u.sum())

    parts = map_chunks(run, samples, SAMPLE_CHUNK, seed, workers)
    s1 = sum(p[0] for p in parts)
    s2 = sum(p[1] for p in parts)
    acc = sum(p[2] for p in parts) / samples
    mean = s1 / samples
    var = max(s2 / samples - mean**2, 0.0)
    scale = float(f.topological_degree) ** n * V.volume
    return scale * mean, scale * math.sqrt(var / max(samples - 1, 1)), acc


def degree_estimate(f: MapSpec, l: int, n: int, samples: int = 20000, seed=0, workers=None,
                    proposal: str = "auto"):
    """Monte-Carlo d_{l,n} = int over U_{-n-1} of the degree-l pullback integrand.

    ``proposal`` is ``"U"`` (uniform on V with rejection), ``"envelope"``
    (family-specific cover of U_{-n-1}), ``"pullback"`` (change of variables
    through random inverse branches) or ``"auto"`` (envelope when the family
    has one, else pullback for l = k and plain rejection otherwise). Returns ``(estimate, stderr, acceptance)``.
    """
    if not 1 <= l <= f.k:
        raise ValueError("degree order must lie in 1..k")
    if n < 0:
        raise ValueError("n must be >= 0")
    if proposal == "auto":
        # the pullback weight e_l/|det|^2 has infinite variance near critical values unless l = k
        proposal = "envelope" if _has_envelope(f) else ("pullback" if l == f.k else "U")
    if proposal == "pullback":
        return _estimate_pullback(f, n, l, samples, as_seed(seed), workers)
    env = envelope(f, n, proposal)
    return _estimate(f, env, n, samples, as_seed(seed), workers, lambda A: _integrand(A, l),
                     proposal == "U")


def _growth(rows, n_max):
    keep = [(n, e, s) for n, e, s, _ in rows if e > 0]
    tail = [r for r in keep if r[0] >= n_max - math.ceil(n_max / 2) + 1] if n_max >= 1 else keep
    if len(tail) < 2:
        tail = keep[-2:]
    if len(tail) < 2:
        return float("nan"), float("nan")
    ns = np.array([r[0] for r in tail], dtype=float)
    y = np.log([r[1] for r in tail])
    w = np.array([r[1] / max(r[2], 1e-300) for r in tail]) if all(r[2] > 0 for r in tail) else None
    slope, _ = np.polyfit(ns, y, 1)
    if w is not None:
        sx = ns - ns.mean()
        se = math.sqrt(float(np.sum((sx / np.sum(sx**2)) ** 2 / w**2)))
    else:
        se = 0.0
    return float(slope), se


def degree_table(f: MapSpec, l: int, n_max: int, samples: int = 20000, seed=0, workers=None,
                 proposal: str = "auto") -> DegreeTable:
    """d_{l,n} for n = 0..n_max and the log-linear growth over the last half of the rows."""
    seeds = np.random.SeedSequence(as_seed(seed)).generate_state(n_max + 1, dtype=np.uint64)
    table = DegreeTable(l)
    for n in range(n_max + 1):
        est, se, _ = degree_estimate(f, l, n, samples, int(seeds[n]), workers, proposal)
        table.rows.append((n, est, se, samples))
    table.growth_rate, table.growth_stderr = _growth(table.rows, n_max)
    return table


def critical_volume(f: MapSpec, n: int, samples: int = 20000, seed=0, workers=None,
                    proposal: str = "auto"):
    """delta_n = d_t^-n sum over critical lines of int ||D f^n e_free||^2 on the line slice.

    Returns ``(estimate, stderr)``. Lines outside U contribute zero.
    """
    if f.k != 2:
        raise ValueError("critical volume is defined here for k = 2")
    crit = f.critical_set()
    seeds = np.random.SeedSequence(as_seed(seed)).generate_state(max(len(crit.lines), 1), dtype=np.uint64)
    total, var = 0.0, 0.0
    for (axis, value), s in zip(crit.lines, seeds):
        free = 1 - axis
        env = envelope(f, n, proposal, line=(axis, complex(value)))
        est, se, _ = _estimate(f, env, n, samples, int(s), workers,
                               lambda A, free=free: np.sum(np.abs(A[:, :, free]) ** 2, axis=1), False)
        total += est
        var += se**2
    dt = float(f.topological_degree) ** n
    return total / dt, math.sqrt(var) / dt


@dataclass
class PLBReport:
    series: DecaySeries
    alpha: float                # d^{k-1} / d_t
    bound_informative: bool     # alpha < 1


def plb_decay(f: MapSpec, n_max: int, samples: int = 20000, seed=0, workers=None,
              proposal: str = "auto") -> PLBReport:
    """v_n = d_{1,n} / d_t^n with fitted rate, against alpha = d^{k-1}/d_t."""
    if f.k != 2:
        raise ValueError("the PLB series is defined here for k = 2")
    table = degree_table(f, 1, n_max, samples, seed, workers, proposal)
    dt = f.topological_degree
    vals = [e / dt**n for n, e, _, _ in table.rows]
    ses = [s / dt**n for n, _, s, _ in table.rows]
    series = fit_decay(np.arange(n_max + 1), vals, ses)
    alpha = f.algebraic_degree ** (f.k - 1) / dt
    return PLBReport(series, alpha, alpha < 1)
