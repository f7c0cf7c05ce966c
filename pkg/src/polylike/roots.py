"""Batched polynomial root finding (Aberth-Ehrlich simultaneous iteration).

Coefficients are always ascending: ``c[j]`` multiplies ``z**j``.
"""
import numpy as np

EPS = np.finfo(float).eps
MAX_ITER = 200
STEP_TOL = 1e-13


class RootFindingError(RuntimeError):
    """Simultaneous iteration did not converge within the iteration cap."""


def horner(coeffs, x):
    """Evaluate ``p(x)`` and ``p'(x)`` for ascending ``coeffs`` (last axis)."""
    coeffs = np.asarray(coeffs)
    x = np.asarray(x)
    p = np.zeros(np.broadcast(x, coeffs[..., -1]).shape, dtype=complex)
    dp = np.zeros_like(p)
    for j in range(coeffs.shape[-1] - 1, -1, -1):
        dp = dp * x + p
        p = p * x + coeffs[..., j]
    return p, dp


def _initial_guess(c):
    # c: (N, d+1) monic-normalised; circle of radius |c0|^(1/d) with an irrational offset
    d = c.shape[1] - 1
    radius = np.abs(c[:, 0]) ** (1.0 / d)
    # fall back to the Cauchy bound when the constant term vanishes
    cauchy = 1.0 + np.max(np.abs(c[:, :-1]), axis=1)
    radius = np.where(radius > 1e-12, radius, 0.5 * cauchy)
    angles = 2 * np.pi * np.arange(d) / d + 0.4
    return radius[:, None] * np.exp(1j * angles)[None, :]


def aberth(coeffs, max_iter=MAX_ITER, tol=STEP_TOL, seed=0):
    """All roots of a batch of polynomials of a common degree.

    Parameters
    ----------
    coeffs : array_like, shape (N, d+1) or (d+1,)
        Ascending coefficients; the leading one must be nonzero.
    max_iter : int
        Iteration cap.
    tol : float
        Relative step size at which a root counts as converged.

    Returns
    -------
    roots : ndarray, shape (N, d) or (d,)
    """
    c = np.asarray(coeffs, dtype=complex)
    squeeze = c.ndim == 1
    c = np.atleast_2d(c)
    if np.any(c[:, -1] == 0):
        raise ValueError("leading coefficient must be nonzero")
    c = c / c[:, -1:]
    n, d1 = c.shape
    d = d1 - 1
    if d == 0:
        out = np.empty((n, 0), dtype=complex)
        return out[0] if squeeze else out
    if d == 1:
        out = -c[:, :1]
        return out[0] if squeeze else out

    z = _initial_guess(c)
    absc = np.abs(c)
    active = np.ones(n, dtype=bool)
    rng = np.random.default_rng(seed)
    eye = np.eye(d, dtype=bool)
    for it in range(max_iter):
        idx = np.nonzero(active)[0]
        if idx.size == 0:
            break
        za = z[idx]
        ca = c[idx]
        p, dp = horner(ca[:, None, :], za)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = p / dp
            diff = za[:, :, None] - za[:, None, :]
            diff[:, eye] = 1.0
            inv = 1.0 / diff
            inv[:, eye] = 0.0
            s = inv.sum(axis=2)
            step = ratio / (1.0 - ratio * s)
        bad = ~np.isfinite(step)
        step[bad] = 0.0
        za = za - step
        z[idx] = za

        scale, _ = horner(absc[idx][:, None, :], np.abs(za))
        pn, _ = horner(ca[:, None, :], za)
        small_step = np.abs(step) <= tol * (1.0 + np.abs(za))
        small_res = np.abs(pn) <= 16 * EPS * scale.real
        done = np.all((small_step | small_res) & ~bad, axis=1)
        active[idx[done]] = False

        # stagnation restart: jitter rows still running at the half-way mark
        if it == max_iter // 2 and np.any(active):
            rows = np.nonzero(active)[0]
            jitter = 1e-3 * (1 + np.abs(z[rows])) * np.exp(2j * np.pi * rng.random(z[rows].shape))
            z[rows] = z[rows] + jitter

    if np.any(active):
        raise RootFindingError(
            f"Aberth iteration did not converge for {int(active.sum())} of {n} polynomials "
            f"after {max_iter} iterations")
    return z[0] if squeeze else z


def compose_coeffs(outer, inner):
    """Ascending coefficients of ``outer(inner(z))``."""
    outer = np.asarray(outer, dtype=complex)
    inner = np.asarray(inner, dtype=complex)
    result = np.array([outer[-1]], dtype=complex)
    for a in outer[-2::-1]:
        result = np.convolve(result, inner)
        result[0] += a
    return result


def derivative_coeffs(coeffs):
    coeffs = np.asarray(coeffs, dtype=complex)
    if coeffs.size <= 1:
        return np.zeros(1, dtype=complex)
    return coeffs[1:] * np.arange(1, coeffs.size)


def trim(coeffs):
    """Drop vanishing leading coefficients (keeps at least one entry)."""
    coeffs = np.asarray(coeffs, dtype=complex)
    nz = np.nonzero(coeffs)[0]
    if nz.size == 0:
        return coeffs[:1] * 0
    return coeffs[: nz[-1] + 1]
