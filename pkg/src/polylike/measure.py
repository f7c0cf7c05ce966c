"""Equilibrium measure as a weighted point cloud, the transfer operator and its diagnostics."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from ._parallel import as_seed, map_chunks
from .maps import MapSpec
from .preimage import (FiberCapExceeded, fiber, iterated_fiber, pullback_points,
                       random_preimages)

WALKER_CHUNK = 64


class Provenance(str, Enum):
    BACKWARD_WALK = "BackwardWalk"
    ITERATED_FIBER = "IteratedFiber"
    PERIODIC_POINTS = "PeriodicPoints"
    CESARO_PULLBACK = "CesaroPullback"


class WalkError(RuntimeError):
    """A backward walk left V or produced non-finite points."""


@dataclass
class WeightedCloud:
    points: np.ndarray
    weights: np.ndarray
    provenance: Provenance
    seed: int | None = None
    params: dict = field(default_factory=dict)

    @property
    def k(self) -> int:
        return self.points.shape[1]

    @property
    def mass(self) -> float:
        return float(np.sum(self.weights))

    def __len__(self):
        return len(self.points)

    def groups(self) -> int:
        """Number of contiguous equal-size blocks (walkers) for batch-mean errors."""
        w = int(self.params.get("walkers", 0) or 0)
        if w >= 10 and len(self) % w == 0:
            return w
        return 0


@dataclass
class DecaySeries:
    """Values v_n with errors and a fit v_n ~ A c^n over points above the noise floor."""

    n: np.ndarray
    values: np.ndarray
    stderr: np.ndarray
    fitted_rate: float = float("nan")
    amplitude: float = float("nan")
    fit_residual: float = float("nan")
    fit_points: int = 0

    def rows(self):
        return list(zip(self.n.tolist(), self.values.tolist(), self.stderr.tolist()))


def fit_decay(n, values, stderr, first=None) -> DecaySeries:
    n = np.asarray(n)
    values = np.asarray(values, dtype=float)
    stderr = np.asarray(stderr, dtype=float)
    floor = np.maximum(3 * stderr, 1e-12 * max(1.0, float(np.max(np.abs(values), initial=0))))
    use = values > floor
    if first is not None:
        use &= n >= first
    out = DecaySeries(n, values, stderr, fit_points=int(use.sum()))
    if use.sum() >= 2:
        slope, icpt = np.polyfit(n[use], np.log(values[use]), 1)
        resid = np.log(values[use]) - (slope * n[use] + icpt)
        out.fitted_rate = float(np.exp(slope))
        out.amplitude = float(np.exp(icpt))
        out.fit_residual = float(np.sqrt(np.mean(resid**2)))
    return out


# -- Monte-Carlo helpers ---------------------------------------------------------

def integrate(cloud: WeightedCloud, phi) -> float:
    """Weighted sum of ``phi`` over the cloud."""
    return float(np.real(np.sum(cloud.weights * phi(cloud.points))))


def mc_stderr(cloud: WeightedCloud, values) -> float:
    """Standard error of the cloud mean of ``values``; batch means over walkers when available."""
    values = np.real(np.asarray(values))
    g = cloud.groups()
    if g:
        means = values.reshape(g, -1).mean(axis=1)
        return float(np.std(means, ddof=1) / math.sqrt(g))
    if len(values) < 2:
        return 0.0
    return float(np.std(values, ddof=1) / math.sqrt(len(values)))


# -- backward walks --------------------------------------------------------------

def default_burn_in(f: MapSpec) -> int:
    # inverse branches shrink each coordinate by about d_t^(-1/k) per step (e.g. 1/2 for (z^2, w^2))
    rate = math.log(f.topological_degree) / f.k
    return 20 + math.ceil(math.log(f.domain.diameter / 1e-9) / rate)


def _walk_batch(f: MapSpec, starts, burn_in, length, rng):
    z = np.array(starts, dtype=complex)
    W = len(z)
    kept = np.empty((length, W, f.k), dtype=complex)
    failed = ~np.all(np.isfinite(z), axis=1) | ~f.domain.contains(z)
    resid = 0.0
    for step in range(burn_in + length):
        prev = z
        z = random_preimages(f, z, rng)
        bad = ~np.all(np.isfinite(z), axis=1) | ~f.domain.contains(z)
        failed |= bad
        if step >= burn_in:
            kept[step - burn_in] = z
            ok = ~failed
            if ok.any():
                r = np.max(np.abs(f.eval(z[ok]) - prev[ok]) / (1 + np.abs(prev[ok])))
                resid = max(resid, float(r))
        z = np.where(failed[:, None], 0.0, z) if failed.any() else z
    return np.swapaxes(kept, 0, 1), failed, resid


def backward_walk(f: MapSpec, start, burn_in: int, length: int, rng) -> np.ndarray:
    """Iterate random preimages from ``start``; return the ``length`` points after burn-in."""
    if burn_in < 0:
        raise ValueError("burn_in must be >= 0")
    start = np.asarray(start, dtype=complex).reshape(1, f.k)
    if not f.domain.contains(start)[0]:
        raise WalkError("start point is not in V")
    pts, failed, _ = _walk_batch(f, start, burn_in, length, np.random.default_rng(rng))
    if failed[0]:
        raise WalkError("backward walk left V")
    return pts[0]


def sample_equilibrium(f: MapSpec, walkers: int = 100, burn_in: int | None = None,
                       per_walker: int = 100, start_law: str = "UniformOnV",
                       seed=0, start=None, workers=None,
                       max_failed_fraction: float = 0.01) -> WeightedCloud:
    """Pool independent backward walks into an equal-weight cloud approximating mu.

    ``start_law="UniformOnV"`` draws each walker's start from Lebesgue measure
    on V; ``"FixedPoint"`` starts every walker at ``start`` (default: center of V).
    """
    if walkers < 1:
        raise ValueError("walkers must be >= 1")
    if start_law not in ("UniformOnV", "FixedPoint"):
        raise ValueError(f"unknown start law {start_law!r}")
    seed = as_seed(seed)
    burn_in = default_burn_in(f) if burn_in is None else burn_in
    fixed = np.asarray(f.domain.center if start is None else start, dtype=complex).reshape(f.k)

    def run(a, b, rng):
        if start_law == "UniformOnV":
            starts = f.domain.sample_uniform(rng, b - a)
        else:
            starts = np.tile(fixed, (b - a, 1))
        return _walk_batch(f, starts, burn_in, per_walker, rng)

    parts = map_chunks(run, walkers, WALKER_CHUNK, seed, workers)
    pts = np.concatenate([p[0] for p in parts])
    failed = np.concatenate([p[1] for p in parts])
    resid = max(p[2] for p in parts)
    if failed.mean() > max_failed_fraction:
        raise WalkError(f"{int(failed.sum())} of {walkers} walkers failed")
    pts = pts[~failed].reshape(-1, f.k)
    n = len(pts)
    return WeightedCloud(pts, np.full(n, 1.0 / n), Provenance.BACKWARD_WALK, seed, {
        "walkers": int((~failed).sum()), "per_walker": per_walker, "burn_in": burn_in,
        "start_law": start_law, "max_forward_residual": resid,
    })


def sample_cesaro(f: MapSpec, depth: int, count: int, seed=0, workers=None) -> WeightedCloud:
    """Sample sigma_N = N^-1 sum_{n<=N} d_t^-n (f^n)^* (Lebesgue on V).

    Each sample draws n uniformly from 1..depth and walks n steps back from a
    uniform start.
    """
    seed = as_seed(seed)

    def run(a, b, rng):
        m = b - a
        z = f.domain.sample_uniform(rng, m)
        steps = rng.integers(1, depth + 1, size=m)
        for s in range(1, depth + 1):
            moving = steps >= s
            z[moving] = random_preimages(f, z[moving], rng)
        return z

    pts = np.concatenate(map_chunks(run, count, 1024, seed, workers))
    return WeightedCloud(pts, np.full(count, 1.0 / count), Provenance.CESARO_PULLBACK, seed,
                         {"depth": depth})


def fiber_cloud(f: MapSpec, z, n: int, cap: int = 10**6) -> WeightedCloud:
    """The measure mu_n^z = d_t^-n (f^n)^* delta_z as a cloud."""
    ps = iterated_fiber(f, z, n, cap=cap)
    w = ps.multiplicities / float(f.topological_degree**n)
    return WeightedCloud(ps.points, w, Provenance.ITERATED_FIBER, None,
                         {"depth": n, "base": [[float(c.real), float(c.imag)] for c in ps.base]})


# -- transfer operator -----------------------------------------------------------

def transfer_apply(f: MapSpec, phi, z) -> float:
    """Lambda phi(z) = d_t^-1 sum over the fiber of m(w) phi(w)."""
    ps = fiber(f, z)
    return float(np.real(np.sum(ps.multiplicities * phi(ps.points)))) / f.topological_degree


def transfer_many(f: MapSpec, phi, z) -> np.ndarray:
    """Lambda phi at every row of ``z``, using all d_t slots."""
    slots = pullback_points(f, z, 1)
    vals = np.real(phi(slots.reshape(-1, f.k))).reshape(slots.shape[:2])
    return vals.mean(axis=1)


def _iterate_many(f, phi, n, z, budget, rng):
    z = np.asarray(z, dtype=complex).reshape(-1, f.k)
    if n == 0:
        return np.real(phi(z)), np.zeros(len(z))
    if f.topological_degree**n <= budget:
        out = np.empty(len(z))
        step = max(1, 2**16 // f.topological_degree**n)
        for a in range(0, len(z), step):
            slots = pullback_points(f, z[a:a + step], n, cap=budget)
            vals = np.real(phi(slots.reshape(-1, f.k))).reshape(slots.shape[:2])
            out[a:a + step] = vals.mean(axis=1)
        return out, np.zeros(len(z))
    chains = np.repeat(z, budget, axis=0)
    for _ in range(n):
        chains = random_preimages(f, chains, rng)
    vals = np.real(phi(chains)).reshape(len(z), budget)
    return vals.mean(axis=1), vals.std(axis=1, ddof=1) / math.sqrt(budget)


def transfer_iterate(f: MapSpec, phi, n: int, z, budget: int = 4096, rng=0):
    """Lambda^n phi(z) with its standard error.

    Exact (zero error) through the full fiber when d_t^n <= budget, otherwise a
    Monte-Carlo mean over ``budget`` random backward chains of length n.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    v, se = _iterate_many(f, phi, n, z, budget, np.random.default_rng(rng))
    return float(v[0]), float(se[0])


@dataclass
class InvarianceResidual:
    name: str
    pushforward: float
    pushforward_se: float
    pullback: float
    pullback_se: float
    scale: float = 1.0           # mean |phi| on the cloud, sets the rounding floor

    def within(self, sigmas=3.0, rounding: float = 1e-10) -> bool:
        # a test function constant on supp mu has zero MC error; leave room for rounding
        floor = rounding * (1 + self.scale)
        return (self.pushforward <= sigmas * self.pushforward_se + floor
                and self.pullback <= sigmas * self.pullback_se + floor)


def _named(tests):
    out = []
    for i, t in enumerate(tests):
        if isinstance(t, tuple):
            out.append(t)
        else:
            out.append((getattr(t, "__name__", f"phi{i}"), t))
    return out


def invariance_report(f: MapSpec, cloud: WeightedCloud, test_functions) -> list:
    """Residuals |int phi o f - int phi| and |int Lambda phi - int phi| with MC errors."""
    image = f.eval(cloud.points)
    out = []
    for name, phi in _named(test_functions):
        base = np.real(phi(cloud.points))
        push = np.real(phi(image)) - base
        pull = transfer_many(f, phi, cloud.points) - base
        out.append(InvarianceResidual(
            name,
            abs(float(np.sum(cloud.weights * push))), mc_stderr(cloud, push),
            abs(float(np.sum(cloud.weights * pull))), mc_stderr(cloud, pull),
            float(np.sum(cloud.weights * np.abs(base)))))
    return out


def l2_convergence(f: MapSpec, cloud: WeightedCloud, phi, n_max: int, budget: int = 1024,
                   points: int = 256, seed=0) -> DecaySeries:
    """v_n = ||Lambda^n phi - c_phi||_{L2(mu)} estimated on a subsample of cloud points."""
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    rng = np.random.default_rng(as_seed(seed))
    c = integrate(cloud, phi)
    c_se = mc_stderr(cloud, np.real(phi(cloud.points)))
    idx = np.sort(rng.choice(len(cloud), size=min(points, len(cloud)), replace=False))
    x = cloud.points[idx]
    vals, ses = [], []
    for n in range(n_max + 1):
        est, se = _iterate_many(f, phi, n, x, budget, rng)
        sq = (est - c) ** 2
        v2 = max(float(np.mean(sq) - np.mean(se**2)), 0.0)
        v2_se = float(np.std(sq, ddof=1) / math.sqrt(len(sq))) if len(sq) > 1 else 0.0
        v = math.sqrt(v2)
        vals.append(v)
        # the plug-in constant carries its own sampling error
        ses.append(math.hypot(v2_se / (2 * v) if v > 0 else math.sqrt(v2_se), c_se))
    return fit_decay(np.arange(n_max + 1), vals, ses, first=1)


# -- persistence -----------------------------------------------------------------

def write_cloud(path, cloud: WeightedCloud) -> None:
    """Columnar text: ``# key=value`` header, rows ``re1,im1[,re2,im2],weight`` at 17 digits."""
    lines = [f"# k={cloud.k}", f"# N={len(cloud)}", f"# seed={cloud.seed}",
             f"# provenance={cloud.provenance.value}",
             f"# params={json.dumps(cloud.params, sort_keys=True)}"]
    cols = []
    for j in range(cloud.k):
        cols += [cloud.points[:, j].real, cloud.points[:, j].imag]
    cols.append(cloud.weights)
    table = np.column_stack(cols)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
        for row in table:
            fh.write(",".join(f"{x:.17g}" for x in row) + "\n")


def read_cloud(path) -> WeightedCloud:
    header = {}
    rows = []
    with open(path) as fh:
        for line in fh:
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                header[key] = value
            elif line.strip():
                rows.append([float(x) for x in line.split(",")])
    k = int(header["k"])
    table = np.array(rows, dtype=float).reshape(-1, 2 * k + 1)
    pts = table[:, 0:2 * k:2] + 1j * table[:, 1:2 * k:2]
    if len(pts) != int(header["N"]):
        raise ValueError("cloud row count does not match header N")
    seed = None if header.get("seed") in (None, "None") else int(header["seed"])
    return WeightedCloud(pts, table[:, -1].copy(), Provenance(header["provenance"]), seed,
                         json.loads(header.get("params", "{}")))


# -- standard test functions -----------------------------------------------------

def standard_tests(k: int, count: int = 12):
    """Smooth real test functions: low monomials Re/Im z^a conj(z)^b, then unit-circle bumps."""
    funcs = []
    for deg in (1, 2, 3):
        for a in np.ndindex(*([deg + 1] * k)):
            for b in np.ndindex(*([deg + 1] * k)):
                if sum(a) + sum(b) != deg or sum(a) < sum(b):
                    continue
                def mono(z, a=a, b=b):
                    out = np.ones(len(z), dtype=complex)
                    for j in range(k):
                        out = out * z[:, j] ** a[j] * np.conj(z[:, j]) ** b[j]
                    return out
                tag = "".join(map(str, a)) + "_" + "".join(map(str, b))
                funcs.append((f"re{tag}", lambda z, m=mono: np.real(m(z))))
                if a != b:
                    funcs.append((f"im{tag}", lambda z, m=mono: np.imag(m(z))))
    n_mono = count - 4
    bumps = []
    for i in range(4):
        c = np.exp(2j * np.pi * (i + 0.5) / 4) * np.ones(k)
        bumps.append((f"bump{i}", lambda z, c=c: np.exp(-np.sum(np.abs(z - c) ** 2, axis=1) / 0.5)))
    return funcs[:n_mono] + bumps
