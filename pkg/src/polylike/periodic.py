"""Periodic points, their multipliers, and equidistribution toward mu."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .maps import Family, MapSpec
from .measure import Provenance, WeightedCloud
from .preimage import random_preimages
from .roots import aberth, compose_coeffs, horner

COMPOSE_LIMIT = 512
CLASS_TOL = 1e-6


class PointClass(str, Enum):
    REPELLING = "repelling"
    SADDLE = "saddle"
    ATTRACTING = "attracting"
    NEUTRAL = "neutral"


class PeriodicCountError(RuntimeError):
    """Number of periodic points found differs from d_t^n on a contractible domain."""


@dataclass
class PeriodicPointSet:
    period: int
    points: np.ndarray          # (M, k)
    multiplicities: np.ndarray  # (M,)
    multipliers: np.ndarray     # (M, k) complex eigenvalues of D(f^n), sorted by modulus desc
    classes: list
    expected_count: int
    exact: bool                 # False: found by walk + Newton, count is a lower bound

    @property
    def count(self) -> int:
        return int(np.sum(self.multiplicities))

    def __len__(self):
        return len(self.points)


def classify(moduli, tol: float = CLASS_TOL) -> PointClass:
    moduli = np.asarray(moduli)
    if np.any(np.abs(moduli - 1) <= tol):
        return PointClass.NEUTRAL
    if np.all(moduli > 1):
        return PointClass.REPELLING
    if np.all(moduli < 1):
        return PointClass.ATTRACTING
    return PointClass.SADDLE


def orbit_jacobian(f: MapSpec, z, n: int) -> np.ndarray:
    """D(f^n) at each row of ``z`` by the chain rule; shape (N, k, k)."""
    z = np.asarray(z, dtype=complex).reshape(-1, f.k)
    A = np.broadcast_to(np.eye(f.k, dtype=complex), (len(z), f.k, f.k)).copy()
    for _ in range(n):
        A = f.jacobian(z) @ A
        z = f.eval(z)
    return A


def _newton(f: MapSpec, z, n: int, iters: int = 60):
    # Newton on f^n(z) - z; returns (points, converged)
    z = np.asarray(z, dtype=complex).copy()
    with np.errstate(all="ignore"):
        return _newton_loop(f, z, n, iters)


def _newton_loop(f, z, n, iters):
    eye = np.eye(f.k)
    done = np.zeros(len(z), dtype=bool)
    for _ in range(iters):
        F = f.iterate(z[~done], n) - z[~done]
        J = orbit_jacobian(f, z[~done], n) - eye
        try:
            step = np.linalg.solve(J, F[..., None])[..., 0]
        except np.linalg.LinAlgError:
            step = np.stack([np.linalg.lstsq(a, b, rcond=None)[0] for a, b in zip(J, F)]) \
                if len(F) else F
        z[~done] -= step
        small = np.all(np.abs(step) <= 1e-13 * (1 + np.abs(z[~done])), axis=1)
        idx = np.nonzero(~done)[0]
        done[idx[small | ~np.all(np.isfinite(step), axis=1)]] = True
        if done.all():
            break
    ok = np.all(np.isfinite(z), axis=1)
    res = np.max(np.abs(f.iterate(z[ok], n) - z[ok]), axis=1) if ok.any() else np.zeros(0)
    ok[ok] = res <= 1e-8 * (1 + np.max(np.abs(z[ok]), axis=1))
    return z, ok


def _dedupe(pts, tol=1e-8):
    # greedy clustering in index order after sorting by real part of the first coordinate
    order = np.lexsort([p for c in range(pts.shape[1]) for p in (pts[:, c].imag, pts[:, c].real)][::-1])
    pts = pts[order]
    reps, mult = [], []
    for p in pts:
        scale = tol * (1 + np.max(np.abs(p)))
        for i in range(len(reps) - 1, max(-1, len(reps) - 64), -1):
            if np.max(np.abs(reps[i] - p)) <= scale:
                mult[i] += 1
                break
        else:
            reps.append(p)
            mult.append(1)
    return np.array(reps).reshape(-1, pts.shape[1]), np.array(mult, dtype=int)


def _merge_close(pts, tol):
    # exact cluster merging (all pairs), used for root lists of moderate size
    if len(pts) == 0:
        return pts, np.zeros(0, dtype=int)
    diff = np.max(np.abs(pts[:, None, :] - pts[None, :, :]), axis=-1)
    adj = diff < tol * (1 + np.max(np.abs(pts), axis=1))[:, None]
    label = np.argmax(adj, axis=1)
    reps = np.unique(label)
    mult = np.array([(label == r).sum() for r in reps], dtype=int)
    return pts[reps], mult


def _roots_1d(coeffs, n: int):
    # roots of p^{on}(z) - z via the composed polynomial
    c = np.array([0, 1], dtype=complex)
    for _ in range(n):
        c = compose_coeffs(coeffs, c)
    c = c.copy()
    c[1] -= 1
    return aberth(c)


def _exact_candidates(f: MapSpec, n: int):
    """Periodic points of period dividing n via one-variable reductions, or None."""
    if f.family is Family.POLY1D:
        return _roots_1d(f.coeffs, n)[:, None]
    if f.is_triangular and len(f.r_coeffs) == 2:
        z2 = _roots_1d(f.Q, n)
        r0, lam = f.r_coeffs
        # f^n first coordinate is lam^n z1 + sum_j lam^{n-1-j} (P + r0)(Q^j z2)
        s = np.zeros_like(z2)
        w = z2.copy()
        for j in range(n):
            s += lam ** (n - 1 - j) * (horner(f.P, w)[0] + r0)
            w = horner(f.Q, w)[0]
        if lam**n == 1:
            return None
        z1 = -s / (lam**n - 1)
        return np.stack([z1, z2], axis=1)
    if f.family is Family.PRODUCT_POWER2D:
        d = f.degree
        if f.variant == "power":
            r = _roots_1d(np.eye(d + 1)[d], n)
            return np.stack(np.meshgrid(r, r, indexing="ij"), axis=-1).reshape(-1, 2)
        m, odd = divmod(n, 2)
        a = np.zeros(d + 1, dtype=complex)
        a[d] = 2.0**d                      # first coordinate of f^2: 2^d z^d
        b = np.zeros(d + 1, dtype=complex)
        b[d] = 2.0                         # second coordinate of f^2: 2 w^d
        if not odd:
            ra, rb = _roots_1d(a, m), _roots_1d(b, m)
            return np.stack(np.meshgrid(ra, rb, indexing="ij"), axis=-1).reshape(-1, 2)
        # z = (b^m(2 a^m(z)))^d, w = 2 a^m(z)
        inner = np.array([0, 1], dtype=complex)
        for _ in range(m):
            inner = compose_coeffs(a, inner)
        g = 2 * inner
        for _ in range(m):
            g = compose_coeffs(b, g)
        g = compose_coeffs(np.eye(d + 1)[d], g).copy()
        g[1] -= 1
        z = aberth(g)
        w = 2 * np.polynomial.polynomial.polyval(z, inner)
        return np.stack([z, w], axis=1)
    return None


def _composed_degree(f: MapSpec, n: int) -> int:
    if f.family is Family.PRODUCT_POWER2D and f.variant == "swap" and n % 2:
        return f.topological_degree**n
    if f.family is Family.PRODUCT_POWER2D:
        return f.degree ** (n if f.variant == "power" else n // 2)
    if f.is_triangular:
        return (len(f.Q) - 1) ** n
    return f.topological_degree**n


def periodic_points(f: MapSpec, n: int, tol_class: float = CLASS_TOL, starts: int | None = None,
                    seed=0, check_count: bool = True) -> PeriodicPointSet:
    """Points with f^n(z) = z, multipliers of D(f^n) and their classes.

    Low degrees use a one-variable composed-polynomial solve (exact count with
    multiplicity). Above ``COMPOSE_LIMIT`` the points are found by Newton on
    f^n - id started from endpoints of n-step backward walks, which land
    within the contraction of the inverse branches of a periodic point; the
    count is then a lower bound.
    """
    if n < 1:
        raise ValueError("period must be >= 1")
    dt = f.topological_degree
    expected = dt**n
    cand = None
    if _composed_degree(f, n) <= COMPOSE_LIMIT:
        cand = _exact_candidates(f, n)
    exact = cand is not None
    if exact:
        polished, ok = _newton(f, cand, n, iters=3)
        pts = np.where(ok[:, None], polished, cand)
        pts, mult = _merge_close(pts, 1e-7) if len(pts) <= 2048 else _dedupe(pts, 1e-7)
    else:
        rng = np.random.default_rng(seed)
        m = starts or 16 * expected + 64
        z = f.domain.sample_uniform(rng, m)
        for _ in range(n):
            z = random_preimages(f, z, rng)
        z, ok = _newton(f, z, n)
        pts, _ = _dedupe(z[ok])
        mult = np.ones(len(pts), dtype=int)
    if f.domain is not None and len(pts):
        inside = f.domain.contains(pts)
        pts, mult = pts[inside], mult[inside]
    with np.errstate(all="ignore"):
        mults = np.linalg.eigvals(orbit_jacobian(f, pts, n)) if len(pts) else np.zeros((0, f.k), complex)
    mults = np.take_along_axis(mults, np.argsort(-np.abs(mults), axis=1), axis=1)
    classes = [classify(np.abs(m), tol_class) for m in mults]
    out = PeriodicPointSet(n, pts, mult, mults, classes, expected, exact)
    contractible = not (f.domain is not None and f.domain.shape.value == "Annulus2D")
    if exact and check_count and contractible and out.count != expected:
        raise PeriodicCountError(f"found {out.count} periodic points of period {n}, expected {expected}")
    return out


def periodic_measure(pts: PeriodicPointSet, repelling_only: bool = True) -> WeightedCloud:
    """Weights d_t^-n on the selected points; the total mass is not renormalised."""
    sel = np.array([c is PointClass.REPELLING for c in pts.classes], dtype=bool) if repelling_only \
        else np.ones(len(pts), dtype=bool)
    p = pts.points[sel] if len(pts) else pts.points
    w = pts.multiplicities[sel] / float(pts.expected_count) if len(pts) else np.zeros(0)
    return WeightedCloud(p.reshape(-1, pts.points.shape[1]), w.astype(float),
                         Provenance.PERIODIC_POINTS, None,
                         {"period": pts.period, "repelling_only": repelling_only})


# -- discrepancy ---------------------------------------------------------------

def moment_family(k: int, max_degree: int = 4):
    """Re and Im of z^a conj(z)^b over multi-indices with |a| + |b| in 1..max_degree."""
    funcs = []
    idx = [(a, b) for a in np.ndindex(*([max_degree + 1] * k)) for b in np.ndindex(*([max_degree + 1] * k))
           if 1 <= sum(a) + sum(b) <= max_degree]
    for a, b in idx:
        def mono(z, a=a, b=b):
            out = np.ones(len(z), dtype=complex)
            for j in range(k):
                out = out * z[:, j] ** a[j] * np.conj(z[:, j]) ** b[j]
            return out
        funcs.append((f"re{a}{b}", lambda z, m=mono: np.real(m(z))))
        funcs.append((f"im{a}{b}", lambda z, m=mono: np.imag(m(z))))
    return funcs


def bump_family(k: int, count: int = 8, radius: float = 2.0, width: float = 0.5, seed: int = 0):
    """Gaussian bumps with centres uniform in the polydisc of the given radius."""
    rng = np.random.default_rng(seed)
    centers = radius * np.sqrt(rng.random((count, k))) * np.exp(2j * np.pi * rng.random((count, k)))
    return [(f"bump{i}", lambda z, c=c: np.exp(-np.sum(np.abs(z - c) ** 2, axis=1) / (2 * width**2)))
            for i, c in enumerate(centers)]


def discrepancy(a: WeightedCloud, b: WeightedCloud, test_family=None) -> float:
    """max over test functions of |int phi dA - int phi dB| (raw masses, no renormalisation)."""
    if a.k != b.k:
        raise ValueError("clouds live in different dimensions")
    if test_family is None:
        test_family = moment_family(a.k) + bump_family(a.k)
    gap = 0.0
    for item in test_family:
        phi = item[1] if isinstance(item, tuple) else item
        ia = float(np.sum(a.weights * np.real(phi(a.points)))) if len(a) else 0.0
        ib = float(np.sum(b.weights * np.real(phi(b.points)))) if len(b) else 0.0
        gap = max(gap, abs(ia - ib))
    return gap


def periodic_rows(pts: PeriodicPointSet):
    """CSV rows ``period, re..., im..., mult1, mult2, class`` (moduli of multipliers)."""
    rows = []
    for p, m, c in zip(pts.points, pts.multipliers, pts.classes):
        mods = [f"{abs(x):.17g}" for x in m] + [""] * (2 - len(m))
        rows.append([str(pts.period)] + [f"{x.real:.17g}" for x in p] + [f"{x.imag:.17g}" for x in p]
                    + mods + [c.value])
    return rows


def discrepancy_series(f: MapSpec, cloud: WeightedCloud, periods, **kw):
    out = []
    for n in periods:
        out.append((n, discrepancy(periodic_measure(periodic_points(f, n, **kw)), cloud)))
    return out
