"""Lyapunov exponents, correlation decay, separated-set entropy and parameter sweeps.

Forward orbits on a repeller amplify rounding error by the expansion rate at
every step, so every orbit statistic here is computed on time-reversed
backward walks: if x ~ mu and w_0 = x, w_{j+1} a random preimage of w_j, then
(w_L, w_{L-1}, ..., w_0) is a forward orbit segment whose starting point is
again mu-distributed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from ._parallel import as_seed, map_chunks
from .maps import MapSpec, validate_polynomial_like
from .measure import DecaySeries, WeightedCloud, fit_decay, mc_stderr, sample_equilibrium
from .preimage import random_preimages

ORBIT_CHUNK = 64


class InvalidRun(RuntimeError):
    """Too many orbits were discarded for the statistic to be meaningful."""


def _pick(cloud: WeightedCloud, count: int, rng) -> np.ndarray:
    w = cloud.weights
    if np.all(w == w[0]):
        return rng.integers(len(cloud), size=count)
    return rng.choice(len(cloud), size=count, p=w / w.sum())


def reversed_orbits(f: MapSpec, points, length: int, rng):
    """Forward orbit segments ending at ``points``.

    Returns ``(orbits, ok)`` with ``orbits[:, i]`` the i-th iterate of the
    segment start, ``orbits[:, length]`` equal to the input points.
    """
    points = np.asarray(points, dtype=complex).reshape(-1, f.k)
    out = np.empty((len(points), length + 1, f.k), dtype=complex)
    out[:, length] = points
    ok = np.all(np.isfinite(points), axis=1)
    z = points
    for t in range(length - 1, -1, -1):
        z = random_preimages(f, z, rng)
        ok &= np.all(np.isfinite(z), axis=1) & f.domain.contains(z)
        z = np.where(ok[:, None], z, 0.0)
        out[:, t] = z
    return out, ok


# -- Lyapunov exponents --------------------------------------------------------

@dataclass
class LyapSpectrum:
    exponents: np.ndarray
    standard_errors: np.ndarray
    orbit_length: int
    sample_count: int
    sum: float
    sum_stderr: float
    jacobian_integral: float
    jacobian_stderr: float
    discarded: int = 0

    @property
    def real_jacobian_exponent(self) -> float:
        """``int log J dmu = 2 * sum``, the real-Jacobian convention."""
        return 2.0 * self.sum

    def consistent(self, sigmas=3.0) -> bool:
        err = math.hypot(self.sum_stderr, self.jacobian_stderr)
        return abs(self.sum - self.jacobian_integral) <= sigmas * err + 1e-9 * (1 + abs(self.sum))


def _stretch(f: MapSpec, orbits):
    # mean per-step log stretching along each segment, QR at every step
    n, L1, k = orbits.shape
    L = L1 - 1
    if k == 1:
        d = f.jacobian(orbits[:, :L])[..., 0, 0]
        with np.errstate(divide="ignore"):
            return np.mean(np.log(np.abs(d)), axis=1)[:, None]
    Q = np.broadcast_to(np.eye(k, dtype=complex), (n, k, k))
    acc = np.zeros((n, k))
    for i in range(L):
        Q, R = np.linalg.qr(f.jacobian(orbits[:, i]) @ Q)
        with np.errstate(divide="ignore"):
            acc += np.log(np.abs(np.diagonal(R, axis1=1, axis2=2)))
    return acc / L


def lyapunov(f: MapSpec, cloud: WeightedCloud, orbit_length: int = 500, samples: int = 200,
             seed=0, workers=None, max_discard: float = 0.10) -> LyapSpectrum:
    """Lyapunov spectrum of mu from QR-accumulated Jacobian cocycles.

    Exponents are per-iteration log stretching of the complex differential,
    so ``z -> z^d`` gives ``log d``.
    """
    if orbit_length < 50:
        raise ValueError("orbit_length must be >= 50")
    seed = as_seed(seed)
    idx = _pick(cloud, samples, np.random.default_rng(seed))

    def run(a, b, rng):
        orbits, ok = reversed_orbits(f, cloud.points[idx[a:b]], orbit_length, rng)
        return _stretch(f, orbits), ok

    parts = map_chunks(run, samples, ORBIT_CHUNK, seed + 1, workers)
    ex = np.concatenate([p[0] for p in parts])
    ok = np.concatenate([p[1] for p in parts]) & np.all(np.isfinite(ex), axis=1)
    discarded = int((~ok).sum())
    if discarded > max_discard * samples:
        raise InvalidRun(f"{discarded} of {samples} orbits discarded; cloud is not on K")
    ex = ex[ok]
    m = len(ex)
    order = np.argsort(-ex.mean(axis=0))
    ex = ex[:, order]
    se = ex.std(axis=0, ddof=1) / math.sqrt(m) if m > 1 else np.zeros(f.k)
    sums = ex.sum(axis=1)
    logdet = np.real(f.log_abs_det(cloud.points))
    return LyapSpectrum(
        exponents=ex.mean(axis=0), standard_errors=se, orbit_length=orbit_length,
        sample_count=m, sum=float(sums.mean()),
        sum_stderr=float(sums.std(ddof=1) / math.sqrt(m)) if m > 1 else 0.0,
        jacobian_integral=float(np.sum(cloud.weights * logdet)),
        jacobian_stderr=mc_stderr(cloud, logdet), discarded=discarded)


# -- correlations --------------------------------------------------------------

def _centred(v, w):
    # a constant observable centres to exact zeros, not to rounding noise
    if np.all(v == v[0]):
        return np.zeros_like(v)
    return v - np.sum(w * v)


def mixing_decay(f: MapSpec, cloud: WeightedCloud, phi, psi, n_max: int, seed=0,
                 workers=None) -> DecaySeries:
    """v_n = |int phi(f^n) psi dmu - int phi dmu int psi dmu| for n = 0..n_max.

    Each cloud point x plays f^n(y) for y an n-step backward walk from x, so
    the pair (y, f^n y) has the joint law of (y, f^n y) under mu. The
    centred (covariance) form makes v_n vanish exactly when phi or psi is
    constant.
    """
    seed = as_seed(seed)
    n_pts = len(cloud)

    def run(a, b, rng):
        orbits, ok = reversed_orbits(f, cloud.points[a:b], n_max, rng)
        return orbits, ok

    parts = map_chunks(run, n_pts, 4096, seed, workers)
    orbits = np.concatenate([p[0] for p in parts])
    if not np.all(np.concatenate([p[1] for p in parts])):
        raise InvalidRun("backward walk left V during the correlation estimate")
    w = cloud.weights / cloud.weights.sum()
    a = _centred(np.real(phi(orbits[:, n_max])), w)
    vals, ses = [], []
    for n in range(n_max + 1):
        b = _centred(np.real(psi(orbits[:, n_max - n])), w)
        prod = a * b
        vals.append(abs(float(np.sum(w * prod))))
        ses.append(float(np.std(prod, ddof=1) / math.sqrt(n_pts)) if n_pts > 1 else 0.0)
    return fit_decay(np.arange(n_max + 1), vals, ses, first=1)


# -- entropy -------------------------------------------------------------------

@dataclass
class EntropyEstimate:
    value: float
    epsilons: list
    counts: np.ndarray            # (len(epsilons), n_max) separated-set sizes, -1 past saturation
    slopes: list
    fit_ranges: list
    sample_count: int
    lower_bound: bool = True


def _embed(orbits):
    # (N, n, k) complex -> (N, 2kn) real; Bowen distance is the sup norm of the difference
    return np.concatenate([orbits.real, orbits.imag], axis=2).reshape(len(orbits), -1)


def separated_count(data: np.ndarray, eps: float, block: int = 2048) -> int:
    """Size of a greedy maximal eps-separated subset in the sup norm (index order)."""
    accepted = np.empty((0, data.shape[1]))
    for a in range(0, len(data), block):
        x = data[a:a + block]
        if len(accepted):
            d, _ = cKDTree(accepted).query(x, k=1, p=np.inf, distance_upper_bound=eps * (1 + 1e-12))
            x = x[d > eps]
        if not len(x):
            continue
        nbrs = [[] for _ in range(len(x))]
        for i, j in cKDTree(x).query_pairs(eps, p=np.inf):
            nbrs[max(i, j)].append(min(i, j))
        keep = np.zeros(len(x), dtype=bool)
        for i in range(len(x)):
            keep[i] = not any(keep[j] for j in nbrs[i])
        accepted = np.vstack([accepted, x[keep]])
    return len(accepted)


def entropy_estimate(f: MapSpec, cloud: WeightedCloud, epsilons=None, n_max: int = 12,
                     samples: int | None = None, seed=0, workers=None,
                     saturation: float = 0.05, min_points: int = 3) -> EntropyEstimate:
    """Growth rate of maximal (n, eps)-separated subsets of mu-typical orbit segments.

    For each eps the slope of ``log #F`` against n is fitted over the n where
    #F is below ``saturation * samples``; the estimate is the median slope.
    This is a lower-bound device for the topological entropy.
    """
    rng = np.random.default_rng(as_seed(seed))
    samples = len(cloud) if samples is None else min(samples, len(cloud))
    base = cloud.points[np.sort(rng.choice(len(cloud), size=samples, replace=False))]
    if epsilons is None:
        spread = float(np.max(np.ptp(np.concatenate([base.real, base.imag], axis=1), axis=0)))
        epsilons = [spread * s for s in (0.1, 0.2, 0.4)]
    epsilons = list(epsilons)

    def run(a, b, r):
        return reversed_orbits(f, base[a:b], n_max - 1, r)

    parts = map_chunks(run, samples, 4096, as_seed(rng), workers)
    orbits = np.concatenate([p[0] for p in parts])
    counts = np.zeros((len(epsilons), n_max), dtype=int)
    slopes, ranges = [], []
    for e, eps in enumerate(epsilons):
        for n in range(1, n_max + 1):
            if n > 1 and counts[e, n - 2] >= saturation * samples:
                counts[e, n - 1:] = -1      # saturated; counts are monotone in n
                break
            counts[e, n - 1] = separated_count(_embed(orbits[:, :n]), eps) if eps > 0 else samples
        n_axis = np.arange(1, n_max + 1)
        use = (counts[e] >= 0) & (counts[e] < saturation * samples)
        if samples == 1 or np.all(counts[e] == counts[e, 0]):
            slopes.append(0.0)
            ranges.append((1, n_max))
            continue
        if use.sum() < min_points:
            continue
        slope = np.polyfit(n_axis[use], np.log(counts[e][use]), 1)[0]
        slopes.append(float(slope))
        ranges.append((int(n_axis[use][0]), int(n_axis[use][-1])))
    value = float(np.median(slopes)) if slopes else float("nan")
    return EntropyEstimate(value, epsilons, counts, slopes, ranges, samples)


# -- parameter sweep -----------------------------------------------------------

@dataclass
class SweepRow:
    s: complex
    h: float
    stderr: float
    valid: bool


@dataclass
class SweepResult:
    rows: list
    submean_center: float | None = None
    submean_circle: float | None = None
    submean_stderr: float | None = None
    submean_ok: bool | None = None
    notes: list = field(default_factory=list)


def lyapunov_sweep(template, grid, walkers: int = 100, per_walker: int = 50,
                   orbit_length: int = 200, samples: int = 100, seed=0, workers=None,
                   disc_center: complex | None = None) -> SweepResult:
    """h(s) = int log J_s dmu_s = 2 * sum of exponents over a parameter grid.

    ``template(s)`` must return a MapSpec. Grid points whose map fails to
    build or validate are marked invalid. When ``disc_center`` is given and
    present in the grid, the remaining points are treated as the surrounding
    circle and the sub-mean-value inequality h(center) <= mean + 3 sigma is
    evaluated.
    """
    seed = as_seed(seed)
    children = np.random.SeedSequence(seed).generate_state(len(grid) * 2, dtype=np.uint64)
    rows = []
    for i, s in enumerate(grid):
        s = complex(s)
        try:
            f = template(s)
            valid = validate_polynomial_like(f).is_polynomial_like
        except (ValueError, RuntimeError):
            valid = False
        if not valid:
            rows.append(SweepRow(s, float("nan"), float("nan"), False))
            continue
        try:
            cloud = sample_equilibrium(f, walkers, per_walker=per_walker, seed=int(children[2 * i]),
                                       workers=workers)
            spec = lyapunov(f, cloud, orbit_length, samples, seed=int(children[2 * i + 1]),
                            workers=workers)
        except RuntimeError:
            rows.append(SweepRow(s, float("nan"), float("nan"), False))
            continue
        rows.append(SweepRow(s, 2 * spec.sum, 2 * spec.sum_stderr, True))
    out = SweepResult(rows)
    if disc_center is None or len(rows) < 2:
        return out
    center = [r for r in rows if abs(r.s - disc_center) < 1e-12 and r.valid]
    circle = [r for r in rows if abs(r.s - disc_center) >= 1e-12 and r.valid]
    if not center or not circle:
        out.notes.append("sub-mean-value check skipped: center or circle invalid")
        return out
    hc = center[0]
    hs = np.array([r.h for r in circle])
    se = math.sqrt(hc.stderr**2 + np.sum(np.array([r.stderr for r in circle]) ** 2) / len(circle)**2)
    out.submean_center = hc.h
    out.submean_circle = float(hs.mean())
    out.submean_stderr = se
    out.submean_ok = bool(hc.h <= hs.mean() + 3 * se)
    return out
