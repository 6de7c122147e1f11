import csv
import json
import math
import subprocess
import sys
from pathlib import Path

import pytest

from formcalc.cli import main, run

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

ONE = {"kind": "const", "value": 1.0}


def stokes_config(**overrides):
    cfg = {
        "experiment": "stokes-check",
        "dim": 2,
        "seed": 42,
        "measure": {"kind": "gaussian_product", "variances": [1.0, 1.0]},
        "domain": {"kind": "halfspace", "axis": [1.0, 0.0], "offset": 0.0},
        "fixtures": {"omega": {"degree": 1, "dim": 2, "coeffs": [{"idx": [1], "expr": ONE}]}},
        "integration": {"method": "quadrature", "tol": 1e-6},
        "expected": {"boundary_side": 1 / math.sqrt(2 * math.pi), "volume_side": 1 / math.sqrt(2 * math.pi)},
    }
    cfg.update(overrides)
    return cfg


def write(tmp_path, cfg, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg, indent=2))
    return path


def strip_timestamp(path):
    report = json.loads(path.read_text())
    report.pop("generated_at")
    return json.dumps(report, sort_keys=True)


def test_stokes_report(tmp_path, capsys):
    out = tmp_path / "out"
    assert run(write(tmp_path, stokes_config()), out) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["experiment"] == "stokes-check" and report["pass"] is True
    assert report["results"]["boundary_side"]["value"] == pytest.approx(0.39894, abs=1e-5)
    assert report["results"]["volume_side"]["value"] == pytest.approx(0.39894, abs=1e-5)
    assert len(report["inputs_digest"]) == 64
    assert set(report) == {"experiment", "inputs_digest", "config", "results", "criteria", "pass", "generated_at"}
    with (out / "trace.csv").open() as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["epsilon", "estimate", "stderr", "extrapolated"]
    assert len(rows) == 7 and rows[1][3] == ""
    assert (out / "trace_volume.csv").exists()
    assert "PASS" in capsys.readouterr().out


def test_adjoint_with_zero_form(tmp_path):
    cfg = {
        "experiment": "adjoint-check",
        "dim": 1,
        "fixtures": {
            "omega": {"degree": 0, "dim": 1, "coeffs": [{"idx": [], "expr": {"kind": "coord", "index": 1}}]},
            "f": {"degree": 1, "dim": 1, "coeffs": []},
        },
    }
    out = tmp_path / "out"
    assert run(write(tmp_path, cfg), out) == 0
    results = json.loads((out / "report.json").read_text())["results"]
    assert results["lhs"] == 0.0 and results["rhs"] == 0.0


def test_degree_mismatch_names_fixture(tmp_path, capsys):
    cfg = stokes_config()
    cfg["fixtures"]["omega"]["degree"] = 2
    cfg["fixtures"]["omega"]["coeffs"] = [{"idx": [1, 2], "expr": ONE}]
    path = write(tmp_path, cfg)
    assert run(path, tmp_path / "out") == 2
    err = capsys.readouterr().err
    assert "fixtures.omega" in err and "'omega'" in err and "degree 2" in err
    line = next(i for i, s in enumerate(path.read_text().splitlines(), 1) if '"omega"' in s)
    assert f"{path}:{line}:" in err
    assert not (tmp_path / "out").exists()


def test_adjoint_degree_relation_checked(tmp_path, capsys):
    cfg = {
        "experiment": "adjoint-check",
        "dim": 2,
        "fixtures": {
            "omega": {"degree": 1, "dim": 2, "coeffs": [{"idx": [1], "expr": ONE}]},
            "f": {"degree": 1, "dim": 2, "coeffs": [{"idx": [2], "expr": ONE}]},
        },
    }
    assert run(write(tmp_path, cfg), tmp_path / "out") == 2
    assert "fixtures.f" in capsys.readouterr().err


@pytest.mark.parametrize(
    "mutate, field",
    [
        (lambda c: c.pop("domain"), "domain"),
        (lambda c: c.update(experiment="nope"), "experiment"),
        (lambda c: c.update(schedule=[0.1, 0.2]), "schedule"),
        (lambda c: c["fixtures"]["omega"]["coeffs"][0].update(expr={"kind": "sin"}), "fixtures.omega"),
        (lambda c: c["fixtures"]["omega"].update(dim=3), "fixtures.omega"),
        (lambda c: c.update(integration={"method": "simpson"}), "integration"),
        (lambda c: c.update(expected={"area": 1.0}), "expected.area"),
    ],
)
def test_config_errors(tmp_path, capsys, mutate, field):
    cfg = stokes_config()
    mutate(cfg)
    assert run(write(tmp_path, cfg), tmp_path / "out") == 2
    assert f"field '{field}'" in capsys.readouterr().err


def test_invalid_json_reports_line(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "experiment": "stokes-check",\n  "dim": 2,,\n}')
    assert run(path, tmp_path / "out") == 2
    assert f"{path}:3:" in capsys.readouterr().err


def test_criterion_failure_exits_one(tmp_path):
    cfg = stokes_config(expected={"boundary_side": 0.5})
    out = tmp_path / "out"
    assert run(write(tmp_path, cfg), out) == 1
    report = json.loads((out / "report.json").read_text())
    assert report["pass"] is False and report["criteria"]["boundary_side_matches_expected"] is False


@pytest.mark.parametrize("method", ["quadrature", "mc"])
def test_reruns_are_byte_identical(tmp_path, method):
    cfg = stokes_config(integration={"method": method, "n": 50_000, "tol": 1e-6}, expected={})
    path = write(tmp_path, cfg)
    run(path, tmp_path / "a")
    run(path, tmp_path / "b")
    assert strip_timestamp(tmp_path / "a" / "report.json") == strip_timestamp(tmp_path / "b" / "report.json")
    assert (tmp_path / "a" / "trace.csv").read_bytes() == (tmp_path / "b" / "trace.csv").read_bytes()


def test_overrides(tmp_path):
    path = write(tmp_path, stokes_config(expected={}))
    assert main(["--config", str(path), "--out", str(tmp_path / "a"), "--seed", "7", "--method", "mc"]) == 0
    report = json.loads((tmp_path / "a" / "report.json").read_text())
    assert report["config"]["seed"] == 7 and report["config"]["integration"]["method"] == "mc"
    assert report["results"]["boundary_side"]["stderr"] > 0
    run(path, tmp_path / "b")
    assert report["inputs_digest"] != json.loads((tmp_path / "b" / "report.json").read_text())["inputs_digest"]


def test_bad_method_flag(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["--config", str(write(tmp_path, stokes_config())), "--method", "simpson"])
    assert exc.value.code == 2


def test_layer_and_pairing_configs(tmp_path):
    for name in ("layer_halfspace", "pairing_halfspace", "algebra"):
        assert run(CONFIGS / f"{name}.json", tmp_path / name) == 0
    with (tmp_path / "pairing_halfspace" / "trace_rhs.csv").open() as fh:
        assert next(csv.reader(fh)) == ["epsilon", "estimate", "stderr", "extrapolated"]


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "formcalc", "--config", str(CONFIGS / "adjoint.json"), "--out", str(tmp_path)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert "adjoint_gap" in proc.stdout
