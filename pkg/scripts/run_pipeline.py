"""Run every config under configs/acceptance through the CLI and report exit codes and timings.

    python scripts/run_pipeline.py [--out runs/] [--workers 1] [--compare 4]

With --compare N every config is run a second time with N workers and the
CSV bodies are compared byte for byte.
"""
import argparse
import glob
import os
import subprocess
import sys
import time

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def body(path):
    with open(path) as fh:
        return fh.readlines()[1:]


def run(cfg, prefix, workers):
    t0 = time.perf_counter()
    r = subprocess.run([sys.executable, "-m", "polylike", "--config", cfg, "--out", prefix,
                        "--workers", str(workers)], capture_output=True, text=True)
    return r.returncode, time.perf_counter() - t0, r.stderr.strip()


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--configs", default=os.path.join(ROOT, "configs", "acceptance"))
    ap.add_argument("--out", default=os.path.join(ROOT, "runs"))
    ap.add_argument("--workers", default="1")
    ap.add_argument("--compare", default=None, help="second worker count for a determinism check")
    args = ap.parse_args()
    os.makedirs(args.out, exist_ok=True)
    failed = 0
    total = time.perf_counter()
    for cfg in sorted(glob.glob(os.path.join(args.configs, "*.json"))):
        name = os.path.splitext(os.path.basename(cfg))[0]
        prefix = os.path.join(args.out, name)
        code, dt, err = run(cfg, prefix, args.workers)
        line = f"{name:28s} exit={code} {dt:6.2f}s"
        if code == 0 and args.compare:
            code2, _, _ = run(cfg, prefix + ".cmp", args.compare)
            same = code2 == 0 and body(prefix + ".csv") == body(prefix + ".cmp.csv")
            line += "  identical" if same else "  DIFFERENT"
            failed += not same
        if code != 0:
            line += f"  {err.splitlines()[-1] if err else ''}"
            failed += 1
        print(line, flush=True)
    print(f"{failed} failures, {time.perf_counter() - total:.1f}s total")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
