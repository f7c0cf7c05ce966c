import json
import os
import subprocess
import sys

import numpy as np
import pytest

from polylike import cli
from polylike.measure import read_cloud


def write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


def run(tmp_path, cfg, *extra):
    out = str(tmp_path / "run")
    code = cli.main(["--config", write(tmp_path, cfg), "--out", out, *extra])
    return code, out


def test_validate_ok(tmp_path):
    code, out = run(tmp_path, {"map": "doubling", "experiment": "validate"})
    assert code == 0
    man = json.load(open(out + ".manifest"))
    assert man["summary"]["polynomial_like"] is True
    assert man["config"]["experiment"] == "validate" and "wall_time_s" in man and "version" in man


def test_validate_failure_exit_2(tmp_path):
    bad = {"family": "Poly1D", "coeffs": [[10, 0], [0, 0], [1, 0]],
           "domain": {"shape": "Ball", "center": [[0, 0]], "radii": [2]}}
    code, out = run(tmp_path, {"map": bad, "experiment": "validate"})
    assert code == 2 and not os.path.exists(out + ".csv") and not os.path.exists(out + ".manifest")


def test_cap_exceeded_exit_2(tmp_path, capsys):
    cfg = {"map": "wd2z", "experiment": "sample", "params": {"method": "fiber", "n": 20, "cap": 10**5}}
    code, out = run(tmp_path, cfg)
    assert code == 2 and "cap" in capsys.readouterr().err
    assert not any(p.name.startswith("run") for p in tmp_path.iterdir())


@pytest.mark.parametrize("cfg", [
    {"map": "doubling", "experiment": "validate", "colour": "red"},
    {"map": "doubling", "experiment": "validate", "params": {"samples": 3}},
    {"map": "doubling", "experiment": "dance"},
    {"map": "nowhere", "experiment": "validate"},
    {"experiment": "validate"},
    {"map": "doubling", "experiment": "validate", "seed": -1},
])
def test_strict_config(tmp_path, cfg):
    assert run(tmp_path, cfg)[0] == 2


def test_numerical_failure_exit_3(tmp_path, capsys):
    cfg = {"map": "skew", "experiment": "degrees", "params": {"n_max": 12, "samples": 2000, "proposal": "U"}}
    code, out = run(tmp_path, cfg)
    assert code == 3 and "numerical" in capsys.readouterr().err
    assert not os.path.exists(out + ".csv")


def test_seed_override_and_round_trip(tmp_path):
    cfg = {"map": "skew", "experiment": "sample", "params": {"walkers": 20, "per_walker": 10}, "seed": 1}
    code, out = run(tmp_path, cfg, "--seed", "99")
    assert code == 0
    config, header, rows = cli.read_csv(out + ".csv")
    assert config["seed"] == 99 and header == ["re1", "re2", "im1", "im2", "weight"]
    cloud = read_cloud(out + ".cloud")
    assert cloud.seed == 99 and len(cloud) == len(rows) == 200
    assert np.array_equal(cloud.points[:, 0].real, [float(r[0]) for r in rows])
    assert json.load(open(out + ".manifest"))["files"]["cloud"] == out + ".cloud"


def _body(tmp_path, cfg, workers, tag):
    out = str(tmp_path / tag)
    assert cli.main(["--config", write(tmp_path, cfg, tag + ".json"), "--out", out,
                     "--workers", str(workers)]) == 0
    return cli.csv_body(out + ".csv")


CONFIG_DIR = os.path.join(os.path.dirname(__file__), "..", "configs")


@pytest.mark.parametrize("name", sorted(f[:-5] for f in os.listdir(CONFIG_DIR)
                                        if f.endswith(".json") and f != "sample_cap.json"))
def test_shipped_configs_deterministic(tmp_path, name):
    cfg = json.load(open(os.path.join(CONFIG_DIR, name + ".json")))
    assert _body(tmp_path, cfg, 1, "a") == _body(tmp_path, cfg, 4, "b")


def test_exceptional_line_components(tmp_path):
    cfg = {"map": "torus", "experiment": "exceptional",
           "params": {"components": [{"line": [1, -1]}], "probes": 3, "n_max": 2}}
    code, out = run(tmp_path, cfg)
    assert code == 0
    assert json.load(open(out + ".manifest"))["summary"]["drops"] == [1, 1, 1]


def test_module_entry_point(tmp_path):
    cfg = write(tmp_path, {"map": "doubling", "experiment": "green"})
    r = subprocess.run([sys.executable, "-m", "polylike", "--config", cfg, "--out", str(tmp_path / "g")],
                       capture_output=True, text=True)
    assert r.returncode == 0
    _, header, rows = cli.read_csv(str(tmp_path / "g.csv"))
    assert float(rows[0][2]) == pytest.approx(np.log(2), abs=1e-12)
