"""Batch runner: one experiment per invocation, JSON report plus CSV traces.

    formcalc --config stokes.json --out results/ [--seed N] [--method mc]

Exit status is 0 when every criterion passes, 1 when one fails and 2 for
config errors (reported with the offending field and its line).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Sequence

from .forms import FormField
from .integrate import IntegrationSpec
from .measures import CoForm, DifferentiableMeasure, adjoint_check, measure_from_json
from .surface import Convergence, Domain, boundary_pairing, default_schedule, domain_from_json, stokes_check
from .surface import surface_measure, validate_schedule
from .suites import algebra_suite

EXPERIMENTS = ("algebra-check", "adjoint-check", "layer-converge", "boundary-pairing", "stokes-check")
TRACE_HEADER = ("epsilon", "estimate", "stderr", "extrapolated")
SURFACE_TOL = 1e-6

# fixture name -> required degree; None means "checked against another fixture"
FIXTURES = {
    "adjoint-check": {"omega": None, "f": None},
    "boundary-pairing": {"g": 1},
    "stokes-check": {"omega": 1},
}


class ConfigError(Exception):
    def __init__(self, message: str, path: Sequence[str] = (), line: int | None = None):
        super().__init__(message)
        self.message = message
        self.path = tuple(path)
        self.line = line

    def render(self, source: str) -> str:
        where = source if self.line is None else f"{source}:{self.line}"
        fieldname = ".".join(self.path) if self.path else "<root>"
        return f"config error: {where}: field '{fieldname}': {self.message}"


def _locate(text: str, path: Sequence[str]) -> int | None:
    """Line of the last key in ``path``, searching each key after its parent."""
    pos, found = 0, None
    for key in path:
        idx = text.find(f'"{key}"', pos)
        if idx < 0:
            break
        pos = found = idx
    return None if found is None else text.count("\n", 0, found) + 1


@dataclass
class ExperimentConfig:
    experiment: str
    dim: int
    seed: int
    raw: dict
    measure: DifferentiableMeasure | None = None
    domain: Domain | None = None
    fixtures: dict[str, FormField] = field(default_factory=dict)
    spec: IntegrationSpec = field(default_factory=IntegrationSpec)
    schedule: tuple[float, ...] | None = None
    expected: dict = field(default_factory=dict)
    report_name: str = "report.json"
    trace_name: str = "trace.csv"


def _require(data: dict, key: str, kind, path=()) -> Any:
    if key not in data:
        raise ConfigError("missing required field", (*path, key))
    value = data[key]
    if not isinstance(value, kind) or isinstance(value, bool) and kind is not bool:
        raise ConfigError(f"expected {getattr(kind, '__name__', kind)}, got {type(value).__name__}", (*path, key))
    return value


def parse_config(raw: dict, seed: int | None = None, method: str | None = None) -> ExperimentConfig:
    """Validate everything (fixtures included) before any computation."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    experiment = _require(raw, "experiment", str)
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {experiment!r}; choose from {', '.join(EXPERIMENTS)}", ("experiment",))
    if seed is not None:
        raw["seed"] = seed
    if method is not None:
        raw.setdefault("integration", {})["method"] = method
    cfg_seed = raw.get("seed", 42)
    if not isinstance(cfg_seed, int) or isinstance(cfg_seed, bool) or not 0 <= cfg_seed < 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer", ("seed",))

    dim = raw.get("dim", 1)
    if experiment != "algebra-check":
        dim = _require(raw, "dim", int)
        if dim < 1:
            raise ConfigError("dimension must be >= 1", ("dim",))
    cfg = ExperimentConfig(experiment, dim, cfg_seed, raw)

    output = raw.get("output", {})
    if not isinstance(output, dict):
        raise ConfigError("expected an object", ("output",))
    cfg.report_name = str(output.get("report", cfg.report_name))
    cfg.trace_name = str(output.get("trace", cfg.trace_name))

    integ = raw.get("integration", {})
    if not isinstance(integ, dict):
        raise ConfigError("expected an object", ("integration",))
    integ = dict(integ)
    integ["seed"] = cfg_seed
    if "tol" not in integ and experiment in ("layer-converge", "boundary-pairing", "stokes-check"):
        integ["tol"] = SURFACE_TOL
    try:
        cfg.spec = IntegrationSpec.from_json(integ)
    except (TypeError, ValueError) as err:
        raise ConfigError(str(err), ("integration",)) from None

    expected = raw.get("expected", {})
    if not isinstance(expected, dict):
        raise ConfigError("expected an object", ("expected",))
    for key, value in expected.items():
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise ConfigError("expected values must be numbers", ("expected", key))
    cfg.expected = {k: float(v) for k, v in expected.items()}

    if experiment == "algebra-check":
        for key in ("trials", "max_index", "max_degree"):
            if key in raw and (not isinstance(raw[key], int) or raw[key] < 1):
                raise ConfigError("must be a positive integer", (key,))
        return cfg

    if "measure" in raw:
        try:
            cfg.measure = measure_from_json(_require(raw, "measure", dict))
        except (TypeError, ValueError, KeyError) as err:
            raise ConfigError(str(err), ("measure",)) from None
        if cfg.measure.dim != dim:
            raise ConfigError(f"measure has dimension {cfg.measure.dim}, config dim is {dim}", ("measure",))
    else:
        cfg.measure = measure_from_json({"kind": "gaussian_product", "dim": dim})

    _parse_fixtures(cfg, raw)

    if experiment in ("layer-converge", "boundary-pairing", "stokes-check"):
        try:
            cfg.domain = domain_from_json(_require(raw, "domain", dict), dim)
        except ConfigError:
            raise
        except (TypeError, ValueError, KeyError) as err:
            raise ConfigError(str(err), ("domain",)) from None
        schedule = raw.get("schedule")
        if schedule is None:
            schedule = default_schedule(cfg.spec)
        if not isinstance(schedule, (list, tuple)) or not all(isinstance(e, (int, float)) for e in schedule):
            raise ConfigError("schedule must be a list of numbers", ("schedule",))
        try:
            cfg.schedule = validate_schedule(schedule, cfg.domain)
        except ValueError as err:
            raise ConfigError(str(err), ("schedule",)) from None
    return cfg


def _parse_fixtures(cfg: ExperimentConfig, raw: dict) -> None:
    wanted = FIXTURES.get(cfg.experiment, {})
    if not wanted:
        return
    fixtures = _require(raw, "fixtures", dict)
    for name, degree in wanted.items():
        path = ("fixtures", name)
        if name not in fixtures:
            raise ConfigError(f"fixture '{name}' is required for {cfg.experiment}", path)
        try:
            form = FormField.from_json(fixtures[name])
        except (TypeError, ValueError, KeyError) as err:
            raise ConfigError(f"fixture '{name}' does not parse: {err}", path) from None
        if form.dim != cfg.dim:
            raise ConfigError(f"fixture '{name}' has dim {form.dim}, config dim is {cfg.dim}", path)
        if degree is not None and form.degree != degree:
            raise ConfigError(f"fixture '{name}' has degree {form.degree}, expected {degree}", path)
        cfg.fixtures[name] = form
    if cfg.experiment == "adjoint-check":
        n, m = cfg.fixtures["omega"].degree, cfg.fixtures["f"].degree
        if m != n + 1:
            raise ConfigError(f"fixture 'f' has degree {m}, expected degree(omega) + 1 = {n + 1}", ("fixtures", "f"))


def inputs_digest(raw: dict) -> str:
    canonical = json.dumps(raw, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def _matches(value: float, stderr: float, target: float, spec: IntegrationSpec) -> bool:
    tol = spec.z * stderr if spec.is_mc else spec.tol
    return abs(value - target) <= tol


def _expected_criteria(cfg: ExperimentConfig, observed: dict[str, tuple[float, float]]) -> dict[str, bool]:
    out = {}
    for key, target in sorted(cfg.expected.items()):
        if key not in observed:
            raise ConfigError(f"no result named {key!r} for {cfg.experiment}", ("expected", key))
        value, stderr = observed[key]
        out[f"{key}_matches_expected"] = _matches(value, stderr, target, cfg.spec)
    return out


def run_experiment(cfg: ExperimentConfig) -> tuple[dict, dict[str, bool], dict[str, Convergence]]:
    """Returns (results, criteria, traces); traces are keyed by CSV suffix."""
    kind = cfg.experiment
    raw = cfg.raw
    if kind == "algebra-check":
        summary = algebra_suite(
            raw.get("trials", 1000), cfg.seed, raw.get("max_index", 8), raw.get("max_degree", 4)
        )
        criteria = {
            "adjunction": summary.max_adjunction_error <= float(raw.get("tolerance", 1e-12)),
            "wedge_bound": summary.wedge_bound_violations == 0,
            "contraction_bound": summary.contraction_bound_violations == 0,
            "anticommutativity": summary.anticommutativity_failures == 0,
        }
        return summary.to_json(), criteria, {}

    if kind == "adjoint-check":
        rep = adjoint_check(cfg.fixtures["omega"], cfg.fixtures["f"], cfg.measure, cfg.spec)
        observed = {"lhs": (rep.lhs, rep.stderr), "rhs": (rep.rhs, rep.stderr)}
        criteria = {"adjoint_gap": rep.passed, **_expected_criteria(cfg, observed)}
        return rep.to_json(), criteria, {}

    if kind == "layer-converge":
        conv = surface_measure(cfg.domain, None, cfg.measure, cfg.schedule, cfg.spec)
        observed = {"limit": (conv.value, conv.stderr)}
        for row in conv.trace:
            observed[f"layer@{row.epsilon:g}"] = (row.estimate, row.stderr)
        criteria = {"finite": all(math.isfinite(r.estimate) for r in conv.trace)}
        criteria.update(_expected_criteria(cfg, observed))
        return {"surface_measure": conv.to_json()}, criteria, {"": conv}

    if kind == "boundary-pairing":
        rep = boundary_pairing(cfg.domain, cfg.measure, cfg.fixtures["g"], cfg.schedule, cfg.spec)
        observed = {"lhs": (rep.lhs.value, rep.lhs.stderr), "rhs": (rep.rhs.value, rep.rhs.stderr)}
        criteria = {"pairing_gap": rep.passed, **_expected_criteria(cfg, observed)}
        return rep.to_json(), criteria, {"": rep.lhs, "rhs": rep.rhs}

    omega = CoForm(cfg.measure, cfg.fixtures["omega"])
    rep = stokes_check(omega, cfg.domain, cfg.schedule, cfg.spec)
    observed = {
        "boundary_side": (rep.boundary_side.value, rep.boundary_side.stderr),
        "volume_side": (rep.volume_side.value, rep.volume_side.stderr),
    }
    criteria = {"stokes": rep.passed, **_expected_criteria(cfg, observed)}
    return rep.to_json(), criteria, {"": rep.boundary_side, "volume": rep.volume_side}


def write_trace(path: Path, conv: Convergence) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_HEADER)
        for row in conv.trace:
            extra = "" if row.extrapolated is None else repr(row.extrapolated)
            writer.writerow([repr(row.epsilon), repr(row.estimate), repr(row.stderr), extra])


def _trace_path(out: Path, name: str, suffix: str) -> Path:
    if not suffix:
        return out / name
    p = Path(name)
    return out / f"{p.stem}_{suffix}{p.suffix}"


def run(config_path: str, out_dir: str, seed: int | None = None, method: str | None = None, stream=None) -> int:
    stream = stream or sys.stdout
    source = str(config_path)
    try:
        text = Path(config_path).read_text()
    except OSError as err:
        print(f"config error: {source}: {err.strerror}", file=sys.stderr)
        return 2
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as err:
        print(f"config error: {source}:{err.lineno}:{err.colno}: invalid JSON: {err.msg}", file=sys.stderr)
        return 2
    try:
        cfg = parse_config(raw, seed, method)
        results, criteria, traces = run_experiment(cfg)
    except ConfigError as err:
        if err.line is None:
            err.line = _locate(text, err.path)
        print(err.render(source), file=sys.stderr)
        return 2

    passed = all(criteria.values())
    report = {
        "experiment": cfg.experiment,
        "inputs_digest": inputs_digest(cfg.raw),
        "config": cfg.raw,
        "results": results,
        "criteria": criteria,
        "pass": passed,
        "generated_at": datetime.now(timezone.utc).isoformat(),
    }
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / cfg.report_name).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    for suffix, conv in traces.items():
        write_trace(_trace_path(out, cfg.trace_name, suffix), conv)

    print(f"{cfg.experiment} ({cfg.spec.method}, seed {cfg.seed})", file=stream)
    for name, ok in criteria.items():
        print(f"  {'PASS' if ok else 'FAIL'}  {name}", file=stream)
    print(f"overall: {'PASS' if passed else 'FAIL'}  report: {out / cfg.report_name}", file=stream)
    return 0 if passed else 1


def _u64(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return value


def main(argv: Sequence[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="formcalc", description="Run one verification experiment.")
    parser.add_argument("--config", required=True, help="experiment config (JSON)")
    parser.add_argument("--out", default="out", help="directory for the report and traces")
    parser.add_argument("--seed", type=_u64, help="override the config seed")
    parser.add_argument("--method", choices=("quadrature", "mc"), help="override the integration method")
    args = parser.parse_args(argv)
    return run(args.config, args.out, args.seed, args.method)


if __name__ == "__main__":
    sys.exit(main())
