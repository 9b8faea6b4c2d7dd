import json
import shutil
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
import yaml

from upwindfilter import cli
from upwindfilter.config import ConfigError, config_from_dict, parse_config
from upwindfilter.filters import OffLatticeWarning

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

BASE = {
    "name": "small",
    "seed": 4,
    "flux": {"name": "burgers"},
    "filter": {"name": "hat", "alpha": 0.0625},
    "grid": {"dim": 1, "N": 64, "length": 1.0},
    "integrator": {"scheme": "ssp_rk3", "t_end": 0.1, "output_times": [0.05]},
    "initial": {"kind": "random_bv", "tv_budget": 2.0},
}


def cfg_with(**over):
    d = json.loads(json.dumps(BASE))
    for k, v in over.items():
        sec, _, key = k.partition("__")
        if key:
            d.setdefault(sec, {})[key] = v
        else:
            d[sec] = v
    return d


def write(tmp_path, d, name="c.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(d))
    return p


@pytest.mark.parametrize("over,key", [
    ({"filter__radius": 1}, "filter.radius"),
    ({"bogus": 1}, "bogus"),
    ({"grid__N": 3}, "grid.N"),
    ({"filter__alpha": -1.0}, "filter.alpha"),
    ({"integrator__scheme": "rk4"}, "integrator.scheme"),
    ({"integrator__safety": 1.5}, "integrator.safety"),
    ({"flux__state_range": [0.2, 1.0]}, "flux.state_range"),
    ({"flux__params": {"speed": 1.0}}, "flux.params.speed"),
    ({"measure__name": "square"}, "measure"),
    ({"filter__alpha": 0.6}, "filter.alpha"),
    ({"initial__kind": "gauss"}, "initial.kind"),
])
def test_strict_validation_names_key(over, key):
    with pytest.raises(ConfigError) as info:
        config_from_dict(cfg_with(**over))
    assert str(info.value).startswith(key)


def test_support_message():
    with pytest.raises(ConfigError, match="support exceeds half domain"):
        config_from_dict(cfg_with(filter__alpha=0.6))


def test_off_lattice_warning_and_exact_error():
    with pytest.warns(OffLatticeWarning, match="atom off-lattice"):
        config_from_dict(cfg_with(filter={"name": "box", "alpha": 0.05}))
    with pytest.raises(ConfigError, match="atom off-lattice"):
        config_from_dict(cfg_with(filter={"name": "box", "alpha": 0.05, "exact": True}))


def test_shipped_configs_parse():
    for p in sorted(CONFIGS.glob("*.yaml")):
        parse_config(p)


def test_initial_data_seeded():
    c = config_from_dict(BASE)
    a, b = c.initial_data(), c.initial_data()
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, c.initial_data(seed=5).values)


def run_cli(argv, capsys):
    code = cli.main([str(a) for a in argv])
    out = capsys.readouterr()
    lines = [ln for ln in out.out.splitlines() if ln.startswith("{")]
    return code, json.loads(lines[-1]), out.err


def test_run_and_analyze(tmp_path, capsys):
    p = write(tmp_path, BASE)
    code, summary, _ = run_cli(["run", "--config", p, "--out", tmp_path / "o"], capsys)
    assert code == 0 and summary["passed"]
    assert (tmp_path / "o" / "trajectory.json").exists()
    assert (tmp_path / "o" / "margins.csv").exists()
    code, summary, _ = run_cli(["analyze", "--trajectory", tmp_path / "o", "--out", tmp_path / "a"], capsys)
    assert code == 0


def test_outputs_identical_across_threads_and_runs(tmp_path, capsys, monkeypatch):
    d = cfg_with(grid={"dim": 2, "N": 48, "length": 1.0}, filter={"name": "hat", "alpha": 0.0625},
                 measure={"name": "hexagon"}, flux={"name": "burgers", "params": {"direction": [1.0, 0.5]}})
    p = write(tmp_path, d)
    # registered so teardown undoes what --threads sets
    monkeypatch.setenv("UPWINDFILTER_THREADS", "1")
    blobs = []
    for i, threads in enumerate((1, 3, 1)):
        out = tmp_path / f"o{i}"
        code, _, _ = run_cli(["run", "--config", p, "--out", out, "--threads", threads], capsys)
        assert code == 0
        blobs.append([f.read_bytes() for f in sorted(out.glob("snapshot_*.csv"))])
    assert blobs[0] and blobs[0] == blobs[1] == blobs[2]


def test_config_error_exit_code(tmp_path, capsys):
    p = write(tmp_path, cfg_with(grid__N=2))
    code, summary, err = run_cli(["run", "--config", p], capsys)
    assert code == 2 and not summary["passed"]
    assert "grid.N" in err


def test_sweep_requires_sweep_scenario(tmp_path, capsys):
    p = write(tmp_path, BASE)
    code, _, err = run_cli(["sweep", "--config", p, "--out", tmp_path], capsys)
    assert code == 2 and "scenario.kind" in err


def test_failed_assertion_exit_code(tmp_path, capsys):
    d = cfg_with(scenario={"kind": "zero_filter_sweep", "alphas": [0.2, 0.1], "min_rate": 5.0},
                 grid={"dim": 1, "N": 96, "length": 3.0, "origin": -1.5},
                 initial={"kind": "riemann", "u_l": 1.0, "u_r": 0.0, "x0": 0.0},
                 filter={"name": "box"}, integrator={"scheme": "ssp_rk3", "t_end": 0.5})
    code, summary, err = run_cli(["sweep", "--config", write(tmp_path, d), "--out", tmp_path], capsys)
    assert code == 1 and "fitted_rate" in err
    assert (tmp_path / "sweep_summary.csv").exists()


def test_operator_and_resolvent_checks(tmp_path, capsys):
    code, summary, _ = run_cli(["operator-check", "--config", write(tmp_path, BASE), "--out", tmp_path], capsys)
    assert code == 0 and (tmp_path / "operator_check.csv").exists()
    code, summary, _ = run_cli(["resolvent-check", "--out", tmp_path / "r"], capsys)
    assert code == 0 and summary["passed"]


def test_console_script(tmp_path):
    exe = shutil.which("upwindfilter")
    argv = [exe] if exe else [sys.executable, "-m", "upwindfilter.cli"]
    r = subprocess.run(argv + ["run", "--config", str(write(tmp_path, BASE)), "--out", str(tmp_path / "o")],
                       capture_output=True, text=True, timeout=120)
    assert r.returncode == 0, r.stderr
    assert json.loads(r.stdout.strip().splitlines()[-1])["passed"]
