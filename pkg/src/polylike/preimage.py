"""Fibers f^{-n}(z) with multiplicities."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .maps import Family, MapSpec
from .roots import RootFindingError, aberth, horner

__all__ = [
    "PreimageSet", "SolveInconsistency", "FiberCapExceeded", "RootFindingError",
    "fiber", "fiber_points", "iterated_fiber", "pullback_points",
    "random_preimage", "random_preimages",
]

DEFAULT_CAP = 10**6


class SolveInconsistency(RuntimeError):
    """Merged fiber does not account for exactly d_t preimages."""


class FiberCapExceeded(ValueError):
    """Requested fiber size d_t^n is above the configured cap."""


@dataclass
class PreimageSet:
    base: np.ndarray
    order: int
    points: np.ndarray          # (M, k)
    multiplicities: np.ndarray  # (M,) int

    @property
    def total(self) -> int:
        return int(np.sum(self.multiplicities))

    def __len__(self):
        return len(self.points)


def _dth_roots(z, d):
    # all d-th roots of each entry of z; (N,) -> (N, d)
    r = np.abs(z) ** (1.0 / d)
    a = np.angle(z)
    return r[:, None] * np.exp(1j * (a[:, None] + 2 * np.pi * np.arange(d)[None, :]) / d)


def _solve_1d(coeffs, targets):
    # roots of p(w) = t for every t; (N,) -> (N, deg p)
    c = np.tile(np.asarray(coeffs, dtype=complex), (len(targets), 1))
    c[:, 0] -= targets
    if c.shape[1] == 3:
        # quadratic formula with the cancellation-free branch
        a, b, c0 = c[:, 2], c[:, 1], c[:, 0]
        disc = np.sqrt(b * b - 4 * a * c0)
        s = np.where(np.real(np.conj(b) * disc) >= 0, 1.0, -1.0)
        q = -(b + s * disc) / 2
        with np.errstate(divide="ignore", invalid="ignore"):
            r2 = np.where(q != 0, c0 / q, 0)
        r1 = q / a
        return _polish(coeffs, targets, np.stack([r1, r2], axis=1))
    return aberth(c)


def _polish(coeffs, targets, roots):
    # one Newton step on simple roots; harmless at double roots where p' vanishes
    p, dp = horner(np.asarray(coeffs, dtype=complex), roots)
    p = p - targets[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        step = p / dp
    ok = np.isfinite(step) & (np.abs(step) < 1e-6 * (1 + np.abs(roots)))
    return np.where(ok, roots - step, roots)


def fiber_points(f: MapSpec, z) -> np.ndarray:
    """All d_t preimage slots (with repetition at critical values).

    ``z`` has shape (N, k) or (k,); returns (N, d_t, k) or (d_t, k). Picking a
    slot uniformly at random samples the fiber with law m(w)/d_t.
    """
    z = np.asarray(z, dtype=complex)
    single = z.ndim == 1
    z = z.reshape(-1, f.k)
    n = len(z)
    if f.family is Family.POLY1D:
        out = _solve_1d(f.coeffs, z[:, 0])[:, :, None]
    elif f.is_triangular:
        w2 = _solve_1d(f.Q, z[:, 1])                              # (N, dq)
        dq = w2.shape[1]
        t = z[:, :1] - horner(f.P, w2)[0]                         # (N, dq)
        r = f.r_coeffs
        if len(r) == 2:
            w1 = ((t - r[0]) / r[1])[:, :, None]                  # (N, dq, 1)
        else:
            w1 = _solve_1d(r, t.ravel()).reshape(n, dq, -1)       # (N, dq, dr)
        dr = w1.shape[2]
        out = np.empty((n, dq * dr, 2), dtype=complex)
        out[:, :, 0] = w1.reshape(n, -1)
        out[:, :, 1] = np.repeat(w2, dr, axis=1)
    elif f.variant == "power":
        d = f.degree
        a = _dth_roots(z[:, 0], d)
        b = _dth_roots(z[:, 1], d)
        out = np.empty((n, d * d, 2), dtype=complex)
        out[:, :, 0] = np.repeat(a, d, axis=1)
        out[:, :, 1] = np.tile(b, (1, d))
    else:
        d = f.degree
        out = np.empty((n, d, 2), dtype=complex)
        out[:, :, 0] = (z[:, 1] / 2)[:, None]
        out[:, :, 1] = _dth_roots(z[:, 0], d)
    return out[0] if single else out


def _cluster_tol(z):
    return 1e-7 * (1 + np.linalg.norm(z, axis=-1))


def _merge_rows(pts, tol):
    # pts (M, d, k); merge slots closer than tol[m] inside each row
    diff = np.max(np.abs(pts[:, :, None, :] - pts[:, None, :, :]), axis=-1)
    adj = diff < tol[:, None, None]
    label = np.argmax(adj, axis=2)                     # first slot in each slot's cluster
    d = pts.shape[1]
    onehot = label[:, :, None] == np.arange(d)[None, None, :]   # (M, slot, rep)
    mult = onehot.sum(axis=1)                          # (M, d) nonzero only on representatives
    with np.errstate(invalid="ignore"):
        rep = np.einsum("msr,msk->mrk", onehot, pts) / np.maximum(mult, 1)[:, :, None]
    return rep, mult


def fiber(f: MapSpec, z, tol: float = 1e-9) -> PreimageSet:
    """Order-1 fiber of ``z`` with multiplicities from root clustering."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    z = np.asarray(z, dtype=complex).reshape(f.k)
    pts = fiber_points(f, z[None, :])
    rep, mult = _merge_rows(pts, _cluster_tol(z[None, :]))
    keep = mult[0] > 0
    out = PreimageSet(z, 1, rep[0][keep], mult[0][keep].astype(int))
    _check(f, out, tol)
    return out


def _check(f, ps: PreimageSet, tol):
    if ps.total != f.topological_degree ** ps.order:
        raise SolveInconsistency(
            f"fiber total {ps.total} != d_t^n = {f.topological_degree ** ps.order}")
    img = f.iterate(ps.points, ps.order)
    res = np.max(np.abs(img - ps.base[None, :])) if len(img) else 0.0
    if res > tol * (1 + np.linalg.norm(ps.base)):
        raise SolveInconsistency(f"fiber residual {res:.3e} exceeds tolerance")


def iterated_fiber(f: MapSpec, z, n: int, cap: int = DEFAULT_CAP, tol: float = 1e-9) -> PreimageSet:
    """Full fiber of f^n by breadth-first expansion; multiplicities multiply along chains."""
    dt = f.topological_degree
    if dt**n > cap:
        raise FiberCapExceeded(f"fiber size d_t^n = {dt}^{n} exceeds cap {cap}")
    z = np.asarray(z, dtype=complex).reshape(f.k)
    pts = z[None, :]
    mult = np.ones(1, dtype=np.int64)
    for _ in range(n):
        slots = fiber_points(f, pts)
        rep, m = _merge_rows(slots, _cluster_tol(pts))
        m = m * mult[:, None]
        keep = m > 0
        pts = rep[keep]
        mult = m[keep]
    out = PreimageSet(z, n, pts, mult)
    _check(f, out, tol)
    return out


def pullback_points(f: MapSpec, z, n: int, cap: int = DEFAULT_CAP) -> np.ndarray:
    """Unmerged d_t^n preimage slots of each row of ``z``: (N, d_t^n, k), equal weights."""
    dt = f.topological_degree
    if dt**n > cap:
        raise FiberCapExceeded(f"fiber size d_t^n = {dt}^{n} exceeds cap {cap}")
    z = np.asarray(z, dtype=complex).reshape(-1, f.k)
    pts = z[:, None, :]
    for _ in range(n):
        N, M, _k = pts.shape
        pts = fiber_points(f, pts.reshape(-1, f.k)).reshape(N, M * dt, f.k)
    return pts


def random_preimages(f: MapSpec, z, rng) -> np.ndarray:
    """One preimage per row of ``z``, drawn with probability m(w)/d_t."""
    z = np.asarray(z, dtype=complex).reshape(-1, f.k)
    n = len(z)
    if f.family is Family.PRODUCT_POWER2D:
        # cheaper than materialising all d^2 slots
        d = f.degree
        j = rng.integers(d, size=(n, 2))
        def root(x, jj):
            return np.abs(x) ** (1.0 / d) * np.exp(1j * (np.angle(x) + 2 * np.pi * jj) / d)
        if f.variant == "power":
            return np.stack([root(z[:, 0], j[:, 0]), root(z[:, 1], j[:, 1])], axis=1)
        return np.stack([z[:, 1] / 2, root(z[:, 0], j[:, 0])], axis=1)
    slots = fiber_points(f, z)
    pick = rng.integers(slots.shape[1], size=n)
    return slots[np.arange(n), pick]


def random_preimage(f: MapSpec, z, rng) -> np.ndarray:
    return random_preimages(f, np.asarray(z, dtype=complex).reshape(1, f.k), rng)[0]
