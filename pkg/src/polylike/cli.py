"""Experiment runner: one JSON config, one experiment, a manifest plus CSV (and optionally a cloud).

    python -m polylike --config run.json [--seed N] [--out PREFIX] [--workers N|auto]

Config keys: ``map`` (reference name or inline map spec), ``experiment``,
``params``, ``seed``, ``workers``, ``out``. Unknown keys, at the top level or
inside ``params``, are rejected. Exit status is 0 on success, 2 when the
config or the map fails validation, 3 on a numerical failure; any files
already written are removed on failure.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import platform
import sys
import time

import numpy as np

from . import __version__, reference
from ._parallel import resolve_workers, set_default_workers
from .exceptional import AlgebraicSet, Line, Point, invariance_verdict, verdict_rows
from .geometry import critical_volume, degree_table, plb_decay
from .green1d import (expansion_constant, functional_residual, green, green_rows,
                      hausdorff_dimension, holder_check)
from .maps import MapSpec, map_spec_from_dict, validate_polynomial_like
from .measure import (fiber_cloud, invariance_report, sample_cesaro, sample_equilibrium,
                      standard_tests, write_cloud)
from .periodic import discrepancy, periodic_measure, periodic_points, periodic_rows
from .spectrum import entropy_estimate, lyapunov, lyapunov_sweep, mixing_decay

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3
TOP_KEYS = {"map", "experiment", "params", "seed", "workers", "out"}


class ConfigError(ValueError):
    pass


# -- parameter schemas ---------------------------------------------------------

CLOUD = {"walkers": 100, "per_walker": 100, "burn_in": None, "start_law": "UniformOnV"}

DEFAULTS = {
    "validate": {"boundary_samples": 64},
    "sample": dict(CLOUD, method="walk", n=4, point=None, cap=10**6, depth=8, count=10000,
                   write_cloud=True),
    "invariance": dict(CLOUD, tests=12),
    "lyapunov": dict(CLOUD, orbit_length=500, samples=200),
    "mixing": dict(CLOUD, n_max=10, phi="cos_arg", psi="cos_arg"),
    "entropy": dict(CLOUD, n_max=12, samples=None, epsilons=None),
    "periodic": dict(CLOUD, periods=[1, 2, 3, 4], discrepancy=True, repelling_only=True),
    "degrees": {"l": 1, "n_max": 6, "samples": 20000, "proposal": "auto"},
    "plb": {"n_max": 6, "samples": 20000, "proposal": "auto", "critical": False},
    "green": {"points": [[2, 0]], "n_max": 200, "tol": 1e-12},
    "hausdorff": dict(CLOUD, expansion_n=8, alpha=0.45, radii=[0.01, 0.02, 0.04, 0.08],
                      centers=100),
    "exceptional": {"components": [], "probes": 20, "n_max": 6, "tol": 1e-8},
    "sweep": dict(CLOUD, per_walker=50, path=["coeffs", 0], grid=None, circle=None,
                  orbit_length=200, samples=100),
}


def _obs(name: str):
    """Named observables for the correlation experiment (functions of the first coordinate)."""
    table = {
        "re": lambda z: np.real(z[..., 0]),
        "im": lambda z: np.imag(z[..., 0]),
        "abs2": lambda z: np.abs(z[..., 0]) ** 2,
        "cos_arg": lambda z: np.cos(np.angle(z[..., 0])),
        "sin_arg": lambda z: np.sin(np.angle(z[..., 0])),
        # smoothed indicator of the arc |arg z| < 1
        "bump": lambda z: 0.5 * (np.tanh((1 - np.abs(np.angle(z[..., 0]))) / 0.2) + 1),
    }
    if name not in table:
        raise ConfigError(f"unknown observable {name!r}; choose from {sorted(table)}")
    return table[name]


def _complex(v, what):
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return complex(v)
    if isinstance(v, list) and len(v) == 2 and all(isinstance(x, (int, float)) for x in v):
        return complex(v[0], v[1])
    raise ConfigError(f"{what}: expected a number or a [re, im] pair, got {v!r}")


def _point(v, k, what):
    if k == 1 and not (isinstance(v, list) and len(v) == 1):
        return np.array([_complex(v, what)])
    if not isinstance(v, list) or len(v) != k:
        raise ConfigError(f"{what}: expected {k} coordinates")
    return np.array([_complex(x, what) for x in v])


# -- config --------------------------------------------------------------------

def resolve_map(obj) -> MapSpec:
    if isinstance(obj, str):
        try:
            return reference.load(obj)
        except KeyError as exc:
            raise ConfigError(str(exc)) from None
    if isinstance(obj, dict):
        return map_spec_from_dict(obj)
    raise ConfigError("map must be a reference name or an inline map spec")


def resolve_config(cfg: dict, seed=None, out=None, workers=None) -> dict:
    """Check keys, fill defaults, apply command-line overrides. Returns a fresh dict."""
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(cfg) - TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config fields: {sorted(unknown)}")
    for key in ("map", "experiment"):
        if key not in cfg:
            raise ConfigError(f"missing config field {key!r}")
    exp = cfg["experiment"]
    if exp not in DEFAULTS:
        raise ConfigError(f"unknown experiment {exp!r}; choose from {sorted(DEFAULTS)}")
    params = cfg.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError("params must be an object")
    bad = set(params) - set(DEFAULTS[exp])
    if bad:
        raise ConfigError(f"unknown params for {exp}: {sorted(bad)}")
    s = cfg.get("seed", 0) if seed is None else seed
    if not isinstance(s, int) or isinstance(s, bool) or not 0 <= s < 2**64:
        raise ConfigError("seed must be an integer in [0, 2^64)")
    w = cfg.get("workers", 1) if workers is None else workers
    if w != "auto":
        try:
            w = int(w)
        except (TypeError, ValueError):
            raise ConfigError("workers must be a positive integer or 'auto'") from None
        if w < 1:
            raise ConfigError("workers must be a positive integer or 'auto'")
    return {
        "map": cfg["map"],
        "experiment": exp,
        "params": dict(DEFAULTS[exp], **params),
        "seed": s,
        "workers": w,
        "out": out or cfg.get("out") or exp,
    }


# -- experiments ---------------------------------------------------------------
# Each returns (header, rows, summary, cloud_or_None).

def _cloud(f, p, seed, workers):
    return sample_equilibrium(f, p["walkers"], p["burn_in"], p["per_walker"], p["start_law"],
                              seed=seed, workers=workers)


def _seeds(seed, m):
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(m, dtype=np.uint64)]


def _cloud_rows(cloud):
    head = [f"re{j + 1}" for j in range(cloud.k)] + [f"im{j + 1}" for j in range(cloud.k)] + ["weight"]
    rows = [[f"{x.real:.17g}" for x in p] + [f"{x.imag:.17g}" for x in p] + [f"{w:.17g}"]
            for p, w in zip(cloud.points, cloud.weights)]
    return head, rows


def run_validate(f, p, seed, workers):
    rep = validate_polynomial_like(f, boundary_samples=p["boundary_samples"], seed=seed % 2**32)
    rows = [[k, repr(v)] for k, v in vars(rep).items()]
    summary = {"polynomial_like": rep.is_polynomial_like, "margin": rep.margin,
               "max_preimage_radius": rep.max_preimage_radius}
    return ["quantity", "value"], rows, summary, None


def run_sample(f, p, seed, workers):
    method = p["method"]
    if method == "walk":
        cloud = _cloud(f, p, seed, workers)
    elif method == "fiber":
        z = f.domain.center if p["point"] is None else _point(p["point"], f.k, "point")
        cloud = fiber_cloud(f, z, p["n"], cap=p["cap"])
    elif method == "cesaro":
        cloud = sample_cesaro(f, p["depth"], p["count"], seed=seed, workers=workers)
    else:
        raise ConfigError("method must be 'walk', 'fiber' or 'cesaro'")
    head, rows = _cloud_rows(cloud)
    summary = {"points": len(cloud), "mass": cloud.mass, "provenance": cloud.provenance.value}
    return head, rows, summary, cloud if p["write_cloud"] else None


def run_invariance(f, p, seed, workers):
    cloud = _cloud(f, p, seed, workers)
    rep = invariance_report(f, cloud, standard_tests(f.k, p["tests"]))
    rows = [[r.name, f"{r.pushforward:.17g}", f"{r.pushforward_se:.17g}", f"{r.pullback:.17g}",
             f"{r.pullback_se:.17g}", str(r.within())] for r in rep]
    summary = {"all_within_3sigma": all(r.within() for r in rep), "tests": len(rep)}
    return ["test", "pushforward", "pushforward_se", "pullback", "pullback_se", "within"], rows, summary, None


def run_lyapunov(f, p, seed, workers):
    s1, s2 = _seeds(seed, 2)
    cloud = _cloud(f, p, s1, workers)
    spec = lyapunov(f, cloud, p["orbit_length"], p["samples"], seed=s2, workers=workers)
    rows = [[str(i + 1), f"{e:.17g}", f"{s:.17g}"]
            for i, (e, s) in enumerate(zip(spec.exponents, spec.standard_errors))]
    rows.append(["sum", f"{spec.sum:.17g}", f"{spec.sum_stderr:.17g}"])
    rows.append(["jacobian_integral", f"{spec.jacobian_integral:.17g}", f"{spec.jacobian_stderr:.17g}"])
    summary = {"exponents": spec.exponents.tolist(), "sum": spec.sum,
               "consistent": spec.consistent(), "discarded": spec.discarded,
               "log_dt": math.log(f.topological_degree)}
    return ["index", "value", "stderr"], rows, summary, None


def run_mixing(f, p, seed, workers):
    s1, s2 = _seeds(seed, 2)
    cloud = _cloud(f, p, s1, workers)
    ser = mixing_decay(f, cloud, _obs(p["phi"]), _obs(p["psi"]), p["n_max"], seed=s2, workers=workers)
    rows = [[str(n), f"{v:.17g}", f"{s:.17g}"] for n, v, s in zip(ser.n, ser.values, ser.stderr)]
    summary = {"fitted_rate": ser.fitted_rate, "amplitude": ser.amplitude}
    return ["n", "value", "stderr"], rows, summary, None


def run_entropy(f, p, seed, workers):
    s1, s2 = _seeds(seed, 2)
    cloud = _cloud(f, p, s1, workers)
    est = entropy_estimate(f, cloud, p["epsilons"], p["n_max"], p["samples"], seed=s2, workers=workers)
    rows = [[f"{eps:.17g}", str(n + 1), str(c)]
            for eps, line in zip(est.epsilons, est.counts) for n, c in enumerate(line)]
    summary = {"entropy": est.value, "slopes": est.slopes, "log_dt": math.log(f.topological_degree),
               "lower_bound": est.lower_bound}
    return ["epsilon", "n", "count"], rows, summary, None


def run_periodic(f, p, seed, workers):
    s1, s2 = _seeds(seed, 2)
    cloud = _cloud(f, p, s1, workers) if p["discrepancy"] else None
    rows, summary = [], {"periods": {}}
    for n in p["periods"]:
        pts = periodic_points(f, int(n), seed=s2)
        rows += periodic_rows(pts)
        info = {"count": pts.count, "expected": pts.expected_count, "exact": pts.exact}
        if cloud is not None:
            info["discrepancy"] = discrepancy(periodic_measure(pts, p["repelling_only"]), cloud)
        summary["periods"][str(n)] = info
    head = (["period"] + [f"re{j + 1}" for j in range(f.k)] + [f"im{j + 1}" for j in range(f.k)]
            + ["mult1", "mult2", "class"])
    return head, rows, summary, None


def run_degrees(f, p, seed, workers):
    tab = degree_table(f, p["l"], p["n_max"], p["samples"], seed=seed, workers=workers,
                       proposal=p["proposal"])
    rows = [[str(l), str(n), f"{e:.17g}", f"{s:.17g}", str(m)] for l, n, e, s, m in tab.csv_rows()]
    summary = {"growth_rate": tab.growth_rate, "growth_stderr": tab.growth_stderr,
               "log_dt": math.log(f.topological_degree)}
    return ["l", "n", "estimate", "stderr", "samples"], rows, summary, None


def run_plb(f, p, seed, workers):
    s1, s2 = _seeds(seed, 2)
    rep = plb_decay(f, p["n_max"], p["samples"], seed=s1, workers=workers, proposal=p["proposal"])
    ser = rep.series
    head = ["n", "value", "stderr"]
    rows = [[str(n), f"{v:.17g}", f"{s:.17g}"] for n, v, s in zip(ser.n, ser.values, ser.stderr)]
    if p["critical"]:
        head += ["critical_volume", "critical_volume_se"]
        cs = _seeds(s2, len(rows))
        for row, n, c in zip(rows, ser.n, cs):
            d, se = critical_volume(f, int(n), p["samples"], seed=c, workers=workers,
                                    proposal=p["proposal"])
            row += [f"{d:.17g}", f"{se:.17g}"]
    summary = {"fitted_rate": ser.fitted_rate, "alpha": rep.alpha,
               "bound_informative": rep.bound_informative}
    return head, rows, summary, None


def run_green(f, p, seed, workers):
    z = np.array([_complex(v, "points") for v in p["points"]])
    ev = green(f, z, p["n_max"], p["tol"])
    res = functional_residual(f, z)
    rows = [list(r[:3]) + [str(r[3]), f"{e:.17g}"] for r, e in zip(green_rows(ev), res)]
    summary = {"max_functional_residual": float(np.max(res)) if len(res) else 0.0,
               "all_converged": bool(np.all(ev.converged))}
    return ["re", "im", "green", "converged", "functional_residual"], rows, summary, None


def run_hausdorff(f, p, seed, workers):
    s1, s2 = _seeds(seed, 2)
    cloud = _cloud(f, p, s1, workers)
    hd = hausdorff_dimension(f, cloud)
    ex = expansion_constant(f, cloud, p["expansion_n"])
    hol = holder_check(f, cloud, p["alpha"], p["radii"], p["centers"], seed=s2)
    rows = [["hausdorff_dimension", f"{hd.value:.17g}", f"{hd.stderr:.17g}"],
            ["lyapunov", f"{hd.lyapunov:.17g}", f"{hd.lyapunov_stderr:.17g}"],
            ["expansion_constant", f"{ex.value:.17g}", ""],
            ["holder_exponent", f"{hol.exponent:.17g}", ""]]
    summary = {"hausdorff_dimension": hd.value, "expansion_nonincreasing": ex.nonincreasing,
               "holder_alpha": hol.alpha, "holder_passed": hol.passed}
    return ["quantity", "value", "stderr"], rows, summary, None


def algebraic_set(components, k) -> AlgebraicSet:
    """Components: ``{"point": [...]}`` or ``{"line": [a, b], "value": c}`` (k = 2)."""
    out = []
    if not isinstance(components, list) or not components:
        raise ConfigError("components must be a nonempty list")
    for c in components:
        if not isinstance(c, dict):
            raise ConfigError("each component must be an object")
        if set(c) == {"point"}:
            out.append(Point(tuple(_point(c["point"], k, "point"))))
        elif "line" in c and set(c) <= {"line", "value"}:
            if k != 2:
                raise ConfigError("line components need a two-variable map")
            a = _point(c["line"], 2, "line")
            if not np.any(a):
                raise ConfigError("line coefficients vanish")
            out.append(Line(tuple(a), _complex(c.get("value", 0), "value")))
        else:
            raise ConfigError(f"bad component {c!r}")
    return AlgebraicSet(tuple(out))


def run_exceptional(f, p, seed, workers):
    X = algebraic_set(p["components"], f.k)
    probes = p["probes"]
    if isinstance(probes, list):
        probes = np.array([_point(v, f.k, "probes") for v in probes])
    vs = invariance_verdict(f, X, probes, p["n_max"], seed=seed, tol=p["tol"])
    head = ([f"probe_re{j + 1}" for j in range(f.k)] + [f"probe_im{j + 1}" for j in range(f.k)]
            + ["n", "count", "ratio", "verdict"])
    summary = {"members": sum(v.member for v in vs), "probes": len(vs),
               "drops": [v.drop_n for v in vs], "monotone": all(v.series.monotone() for v in vs)}
    return head, verdict_rows(vs), summary, None


def _substitute(obj, path, value):
    obj = json.loads(json.dumps(obj))
    node = obj
    try:
        for key in path[:-1]:
            node = node[key]
        node[path[-1]] = [value.real, value.imag]
    except (KeyError, IndexError, TypeError):
        raise ConfigError(f"sweep path {path!r} does not address a coefficient") from None
    return obj


def run_sweep(f, p, seed, workers, raw_map=None):
    base = f.to_dict() if raw_map is None or isinstance(raw_map, str) else raw_map
    base = {k: v for k, v in base.items() if k != "domain"}
    center = None
    if p["circle"] is not None:
        c = p["circle"]
        if not isinstance(c, dict) or set(c) != {"center", "radius", "count"}:
            raise ConfigError("circle must have center, radius and count")
        center = _complex(c["center"], "circle.center")
        grid = [center] + [center + c["radius"] * np.exp(2j * np.pi * j / c["count"])
                           for j in range(c["count"])]
    elif p["grid"] is not None:
        grid = [_complex(v, "grid") for v in p["grid"]]
    else:
        raise ConfigError("sweep needs a grid or a circle")

    def template(s):
        return map_spec_from_dict(_substitute(base, p["path"], s))

    res = lyapunov_sweep(template, grid, p["walkers"], p["per_walker"], p["orbit_length"],
                         p["samples"], seed=seed, workers=workers, disc_center=center)
    rows = [[f"{r.s.real:.17g}", f"{r.s.imag:.17g}", f"{r.h:.17g}", f"{r.stderr:.17g}", str(r.valid)]
            for r in res.rows]
    summary = {"submean_ok": res.submean_ok, "submean_center": res.submean_center,
               "submean_circle": res.submean_circle, "notes": res.notes}
    return ["s_re", "s_im", "h", "stderr", "valid"], rows, summary, None


RUNNERS = {
    "validate": run_validate, "sample": run_sample, "invariance": run_invariance,
    "lyapunov": run_lyapunov, "mixing": run_mixing, "entropy": run_entropy,
    "periodic": run_periodic, "degrees": run_degrees, "plb": run_plb, "green": run_green,
    "hausdorff": run_hausdorff, "exceptional": run_exceptional, "sweep": run_sweep,
}


# -- output --------------------------------------------------------------------

def _jsonable(x):
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    if isinstance(x, float) and not math.isfinite(x):
        return repr(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not serialisable: {type(x)}")


def _clean(x):
    # json.dumps lets nan through as a bare token; spell it as a string instead
    if isinstance(x, float) and not math.isfinite(x):
        return repr(x)
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    return x


def write_csv(path, config: dict, header, rows):
    with open(path, "w") as fh:
        fh.write("# config=" + json.dumps(config, sort_keys=True, default=_jsonable) + "\n")
        fh.write(",".join(header) + "\n")
        for r in rows:
            fh.write(",".join(str(x) for x in r) + "\n")


def read_csv(path):
    """Return (config, header, rows) from a file written by :func:`write_csv`."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    config = json.loads(lines[0][len("# config="):])
    header = lines[1].split(",")
    return config, header, [ln.split(",") for ln in lines[2:]]


def csv_body(path) -> str:
    """Everything after the config line; the part compared for determinism."""
    with open(path) as fh:
        return "".join(fh.readlines()[1:])


def write_manifest(path, config, status, wall, summary, files, error=None):
    doc = {"status": status, "config": config, "seed": config["seed"], "version": __version__,
           "python": platform.python_version(), "numpy": np.__version__,
           "wall_time_s": round(wall, 3), "files": files, "summary": summary}
    if error:
        doc["error"] = error
    with open(path, "w") as fh:
        json.dump(_clean(doc), fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")


def execute(config: dict) -> dict:
    """Run a resolved config and write its outputs. Raises on failure after cleaning up."""
    t0 = time.perf_counter()
    prefix = config["out"]
    written = []
    try:
        f = resolve_map(config["map"])
        workers = resolve_workers(config["workers"])
        set_default_workers(workers)
        exp = config["experiment"]
        if exp != "validate":
            rep = validate_polynomial_like(f)
            if not rep.is_polynomial_like:
                raise ConfigError(f"map is not polynomial-like on its domain "
                                  f"(max preimage gauge {rep.max_gauge:.6g} >= 1)")
        runner = RUNNERS[exp]
        if exp == "sweep":
            head, rows, summary, cloud = runner(f, config["params"], config["seed"], workers,
                                                raw_map=config["map"])
        else:
            head, rows, summary, cloud = runner(f, config["params"], config["seed"], workers)
        if exp == "validate" and not summary["polynomial_like"]:
            raise ConfigError(f"map is not polynomial-like: margin {summary['margin']:.6g}")
        d = os.path.dirname(prefix)
        if d:
            os.makedirs(d, exist_ok=True)
        files = {"csv": prefix + ".csv"}
        written.append(files["csv"])
        write_csv(files["csv"], config, head, rows)
        if cloud is not None:
            files["cloud"] = prefix + ".cloud"
            written.append(files["cloud"])
            write_cloud(files["cloud"], cloud)
        files["manifest"] = prefix + ".manifest"
        written.append(files["manifest"])
        write_manifest(files["manifest"], config, "ok", time.perf_counter() - t0, summary, files)
        return {"files": files, "summary": summary}
    except BaseException:
        for path in written:
            if os.path.exists(path):
                os.remove(path)
        raise


def exit_code(exc: BaseException) -> int:
    # config problems and rejected inputs are ValueErrors; everything numerical is a RuntimeError
    if isinstance(exc, (ValueError, KeyError, TypeError)):
        return EXIT_INVALID
    return EXIT_NUMERICAL


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="polylike", description=__doc__.splitlines()[0])
    ap.add_argument("--config", required=True, help="experiment config (JSON)")
    ap.add_argument("--seed", type=int, default=None, help="override the config seed")
    ap.add_argument("--out", default=None, help="output path prefix")
    ap.add_argument("--workers", default=None, help="worker threads: N or 'auto'")
    args = ap.parse_args(argv)
    try:
        with open(args.config) as fh:
            raw = json.load(fh)
        config = resolve_config(raw, args.seed, args.out, args.workers)
    except (OSError, json.JSONDecodeError, ConfigError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    try:
        res = execute(config)
    except Exception as exc:
        code = exit_code(exc)
        kind = "invalid input" if code == EXIT_INVALID else "numerical failure"
        print(f"{kind}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return code
    print(json.dumps({"files": res["files"]}, sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
