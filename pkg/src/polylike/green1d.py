"""One-variable potential theory: Green function, expansion constant, Hoelder and dimension checks."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .maps import Family, MapSpec, escape_radius
from .measure import WeightedCloud, mc_stderr
from .roots import horner


def _require_1d(f: MapSpec):
    if f.family is not Family.POLY1D:
        raise ValueError("this operation needs a one-variable polynomial map")


@dataclass
class GreenEval:
    z: np.ndarray
    value: np.ndarray
    iterations_used: np.ndarray
    converged: np.ndarray


def green(f: MapSpec, z, n_max: int = 200, tol: float = 1e-12) -> GreenEval:
    """Escape-rate Green function G(z) = lim d^-n log|f^n(z)|.

    Once |w| exceeds the escape radius, log|p(w)| = d log|w| + log|a_d| + r
    with |r| <= 2C/|w|, C = sum_{j<d} |a_j| / |a_d|. Iteration stops when the
    scaled remainder d^-n 2C/|w_n| drops below ``tol``; the limit is then
    d^-n (log|w_n| + log|a_d| / (d-1)). Orbits that stay inside the escape
    radius for ``n_max`` steps get G = 0.
    """
    _require_1d(f)
    c = np.asarray(f.coeffs, dtype=complex)
    d = len(c) - 1
    lead = abs(c[-1])
    C = float(np.sum(np.abs(c[:-1]))) / lead
    R = escape_radius(c)
    shift = math.log(lead) / (d - 1)
    w = np.array(z, dtype=complex).reshape(-1)
    out = np.zeros(w.shape)
    used = np.full(w.shape, n_max)
    done = np.zeros(w.shape, dtype=bool)
    conv = np.zeros(w.shape, dtype=bool)
    scale = 1.0
    for n in range(n_max + 1):
        a = np.abs(w)
        ready = ~done & (a > R) & (scale * 2 * C / np.maximum(a, 1e-300) < tol)
        out[ready] = scale * (np.log(a[ready]) + shift)
        used[ready] = n
        conv[ready] = True
        done |= ready
        if done.all() or n == n_max:
            break
        with np.errstate(over="ignore", invalid="ignore"):
            w = np.where(done, 0, horner(c, w)[0])
        scale /= d
    # bounded for n_max steps: inside K up to the horizon
    bounded = ~done & (np.abs(w) <= R)
    conv[bounded] = True
    late = ~done & ~bounded
    out[late] = scale * (np.log(np.abs(w[late])) + shift)
    shape = np.shape(z)
    return GreenEval(np.asarray(z), out.reshape(shape), used.reshape(shape), conv.reshape(shape))


def green_value(f: MapSpec, z, **kw) -> np.ndarray:
    return green(f, z, **kw).value


def functional_residual(f: MapSpec, z, n: int = 1) -> np.ndarray:
    """|G(f^n z) - d^n G(z)|; the escape rate satisfies it exactly."""
    _require_1d(f)
    z = np.asarray(z, dtype=complex)
    fz = f.iterate(z[..., None], n)[..., 0]
    d = f.topological_degree
    return np.abs(green_value(f, fz) - d**n * green_value(f, z))


def telescoping_residual(f: MapSpec, potential, z, n: int) -> np.ndarray:
    """Residual of G(w) - G(f^n w)/d^n = sum_{j<n} u(f^j w)/d^j with u = G - G o f / d.

    ``potential`` is any potential of mu on V (a callable on complex arrays).
    """
    z = np.asarray(z, dtype=complex)
    d = f.topological_degree
    orbit = [z]
    for _ in range(n + 1):
        orbit.append(horner(np.asarray(f.coeffs), orbit[-1])[0])
    G = [potential(w) for w in orbit]
    lhs = G[0] - G[n] / d**n
    rhs = sum((G[j] - G[j + 1] / d) / d**j for j in range(n))
    return np.abs(lhs - rhs)


# -- expansion constant --------------------------------------------------------

@dataclass
class ExpansionReport:
    n: int
    values: np.ndarray         # M_1 .. M_n
    nonincreasing: bool

    @property
    def value(self) -> float:
        return float(self.values[-1])


def expansion_constant(f: MapSpec, cloud: WeightedCloud, n: int, tol: float = 1e-6) -> ExpansionReport:
    """M_j = (max over the cloud of |(f^j)'|)^(1/j) for j = 1..n, by the chain rule.

    The cloud approximates the support of mu; where K has interior this
    sup can undershoot the sup over K.
    """
    _require_1d(f)
    if n < 1:
        raise ValueError("n must be >= 1")
    c = np.asarray(f.coeffs, dtype=complex)
    w = cloud.points[:, 0].copy()
    logd = np.zeros(len(w))
    vals = []
    with np.errstate(divide="ignore"):
        for j in range(1, n + 1):
            p, dp = horner(c, w)
            logd += np.log(np.abs(dp))
            w = p
            if not np.all(np.isfinite(w)):
                raise FloatingPointError("forward orbit of a cloud point escaped")
            vals.append(math.exp(float(np.max(logd)) / j))
    vals = np.array(vals)
    mono = bool(np.all(np.diff(vals) <= tol * vals[:-1])) if n > 1 else True
    return ExpansionReport(n, vals, mono)


# -- Hoelder check -------------------------------------------------------------

@dataclass
class HolderReport:
    alpha: float
    exponent: float            # fitted slope of log sup_x mu(B(x, r)) against log r
    passed: bool
    radii: np.ndarray
    sup_mass: np.ndarray
    worst_center: complex | None
    note: str = ""


def _ball_masses(cloud: WeightedCloud, centers, radii):
    pts = cloud.points[:, 0]
    dist = np.abs(pts[None, :] - centers[:, None])            # (C, N)
    return np.stack([(cloud.weights[None, :] * (dist < r)).sum(axis=1) for r in radii], axis=1)


def holder_check(f: MapSpec, cloud: WeightedCloud, alpha: float, radii, centers: int = 100,
                 seed=0, fit_tol: float = 0.1, extra_centers=None) -> HolderReport:
    """Test mu(B(x, r)) <= c r^alpha from the scaling of the worst ball mass.

    Centres are random cloud points plus the cloud's extreme points in each
    real direction (where thin ends of the support concentrate mass). The
    exponent is the log-log slope of sup_x mu(B(x, r)); the check passes when
    it is at least ``alpha - fit_tol``.
    """
    _require_1d(f)
    radii = np.sort(np.asarray(list(radii), dtype=float))
    if radii.size == 0:
        warnings.warn("empty radius list: Hoelder check is vacuous", stacklevel=2)
        return HolderReport(alpha, float("nan"), True, radii, np.zeros(0), None, "vacuous")
    resolution = 1.0 / len(cloud)
    if np.any(radii < resolution):
        raise ValueError(f"radii below the cloud resolution {resolution:.2e}")
    rng = np.random.default_rng(seed)
    pts = cloud.points[:, 0]
    picks = pts[rng.choice(len(pts), size=min(centers, len(pts)), replace=False)]
    extremes = pts[[np.argmin(pts.real), np.argmax(pts.real), np.argmin(pts.imag), np.argmax(pts.imag)]]
    cand = np.concatenate([picks, extremes] + ([np.asarray(extra_centers, dtype=complex)]
                                               if extra_centers is not None else []))
    masses = _ball_masses(cloud, cand, radii)
    sup = masses.max(axis=0)
    worst = complex(cand[np.argmax(masses[:, 0])])
    if np.any(sup <= 0) or len(radii) < 2:
        return HolderReport(alpha, float("nan"), False, radii, sup, worst, "empty balls")
    slope = float(np.polyfit(np.log(radii), np.log(sup), 1)[0])
    return HolderReport(alpha, slope, bool(slope >= alpha - fit_tol), radii, sup, worst)


# -- Hausdorff dimension -------------------------------------------------------

@dataclass
class DimensionEstimate:
    value: float
    stderr: float
    lyapunov: float            # int log|f'| dmu
    lyapunov_stderr: float


def hausdorff_dimension(f: MapSpec, cloud: WeightedCloud) -> DimensionEstimate:
    """HD(mu) = log d_t / int log|f'| dmu with delta-method error."""
    _require_1d(f)
    with np.errstate(divide="ignore"):
        vals = np.log(np.abs(horner(np.asarray(f.coeffs), cloud.points[:, 0])[1]))
    if not np.all(np.isfinite(vals)):
        raise FloatingPointError("cloud contains a critical point")
    lyap = float(np.sum(cloud.weights * vals))
    se = mc_stderr(cloud, vals)
    if lyap <= 0:
        raise FloatingPointError("int log|f'| dmu <= 0: the cloud is not an equilibrium sample")
    hd = math.log(f.topological_degree) / lyap
    return DimensionEstimate(hd, hd * se / lyap, lyap, se)


def green_rows(ev: GreenEval):
    z = np.ravel(ev.z)
    return [(f"{complex(a).real:.17g}", f"{complex(a).imag:.17g}", f"{v:.17g}", int(c))
            for a, v, c in zip(z, np.ravel(ev.value), np.ravel(ev.converged))]
