import json
import os

import pytest

from bosonlr.cli import EXIT_CONFIG, EXIT_PASS, EXIT_RESOURCE, emit_plot_script, main
from bosonlr.config import from_dict
from bosonlr.experiments import run_moment_propagation


def write_cfg(tmp_path, data, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


def test_validate_config_ok(tmp_path, capsys):
    path = write_cfg(tmp_path, {"preset": "chain-6"})
    assert main(["validate-config", "--config", path]) == EXIT_PASS
    assert "config OK" in capsys.readouterr().out


def test_validate_config_error(tmp_path, capsys):
    path = write_cfg(tmp_path, {"preset": "chain-10", "sweeps": {"moment_p": 4}})
    assert main(["validate-config", "--config", path]) == EXIT_CONFIG
    assert "p > 2d+2" in capsys.readouterr().err


def test_missing_config_path(capsys):
    assert main(["validate-config", "--config", "/no/such/file.json"]) == EXIT_CONFIG
    assert "not found" in capsys.readouterr().err


def test_run_kms_writes_reports(tmp_path, capsys):
    cfg = write_cfg(
        tmp_path,
        {
            "preset": "two-site",
            "basis": {"n_max": 4},
            "thermal": {"tail_tol": 1e-5},
            "sweeps": {"times": [0.0, 0.5], "strip_points": 5},
            "volumes": [2],
        },
    )
    out = tmp_path / "reports"
    code = main(["kms", "--config", cfg, "--out", str(out)])
    assert code == EXIT_PASS
    files = sorted(os.listdir(out))
    assert any(f.endswith(".csv") for f in files)
    assert any(f.endswith(".json") for f in files)
    assert "PASS" in capsys.readouterr().out


def test_resource_limit_exit_code(tmp_path, capsys):
    # a single sector far above the dense cap trips the resource guard
    cfg = write_cfg(tmp_path, {"preset": "chain-6", "basis": {"sector": 12}})
    assert main(["moments", "--config", cfg, "--out", str(tmp_path)]) == EXIT_RESOURCE
    assert "resource" in capsys.readouterr().err


def test_env_output_dir(tmp_path, monkeypatch):
    cfg = write_cfg(tmp_path, {"preset": "chain-6", "sweeps": {"times": [0.0]}})
    env_dir = tmp_path / "envout"
    monkeypatch.setenv("BOSONLR_OUT", str(env_dir))
    assert main(["moments", "--config", cfg]) == EXIT_PASS
    assert env_dir.exists() and any(f.endswith(".csv") for f in os.listdir(env_dir))


def test_plot_script_deterministic(tmp_path):
    cfg = from_dict({"preset": "chain-6", "sweeps": {"times": [0.0, 0.5, 1.0]}})
    rep = run_moment_propagation(cfg)
    d1, d2 = tmp_path / "a", tmp_path / "b"
    d1.mkdir(), d2.mkdir()
    assert emit_plot_script(rep, d1 / "moments.plt") is not None
    assert emit_plot_script(rep, d2 / "moments.plt") is not None
    assert (d1 / "moments.plt").read_bytes() == (d2 / "moments.plt").read_bytes()
    assert "logscale" in (d1 / "moments.plt").read_text()


def test_plot_script_single_point_advisory(tmp_path):
    from bosonlr.experiments import ExperimentReport

    rep = ExperimentReport(
        experiment="moments",
        columns=["t", "site", "measured", "bound", "ratio", "pass"],
        records=[{"t": 0.5, "site": 0, "measured": 1.0, "bound": 2.0, "ratio": 0.5, "pass": True}],
        summary={},
        metadata={},
        passed=True,
    )
    assert emit_plot_script(rep, tmp_path / "one.plt") is None
    assert not (tmp_path / "one.plt").exists()


def test_plot_script_no_axis_advisory(tmp_path):
    cfg = from_dict(
        {
            "preset": "two-site",
            "basis": {"n_max": 3},
            "thermal": {"tail_tol": 1e-2},
            "sweeps": {"times": [0.0], "strip_points": 3},
            "volumes": [],
        }
    )
    from bosonlr.experiments import run_kms_check

    rep = run_kms_check(cfg)
    assert emit_plot_script(rep, tmp_path / "kms.plt") is None
