"""``geninv-lab``: run named experiments from JSON configs and write reports.

Usage::

    geninv-lab <experiment> --config <path> [--check] [--out <dir>] [--seed N]
    geninv-lab list

Exit status is 0 on success, 2 on any library or input error and 3 when
``--check`` is given and an acceptance threshold is missed.
"""
import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .charts import OperatorPoint, chart_inverse, tangent_space_basis, verify_chart_maps_manifold
from .conjugacy import BUILTIN_MAPS, builtin_map, jacobian_family, local_conjugacy, verify_conjugacy
from .exceptions import DomainError, GenInvLabError, ParseError, UnknownExperiment
from .frobenius import (
    BUILTIN_FAMILIES,
    alpha_field,
    builtin_family,
    cofinal_membership,
    integrability_residual,
    integrate_patch,
    split_frame,
    verify_tangency,
)
from .geninv import (
    GenInverse,
    check_equivalent_conditions,
    gen_inverse_from_complements,
    is_locally_fine,
    mp_sweep_curve,
    nashed_chen_inverse,
)
from .serialize import csv_table, dumps, matrix_from_json, subspace_from_json
from .subspace import rank_of

__all__ = ["ExperimentConfig", "Report", "parse_config", "run_experiment", "write_report", "main", "EXPERIMENTS"]

DEFAULT_TOLERANCES = {
    "rank_tol": None,
    "residual_tol": 1e-8,
    "roundtrip_tol": 1e-10,
    "conjugacy_tol": 1e-8,
    "tangency_tol": 1e-5,
    "solution_tol": 1e-6,
    "sweep_final_tol": 1e-5,
    "nonintegrable_min": 0.1,
}

DEFAULT_STEPS = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6]

# Per-family patch defaults: radius, grid_step, ode_step.
FAMILY_DEFAULTS = {
    "circle": (0.9, 1e-3, 1e-3),
    "paraboloid": (0.5, 0.05, 0.025),
    "contact": (0.5, 0.05, 0.025),
}
INTEGRABLE = {"circle", "paraboloid"}


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    inputs: dict
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    output_path: str = "."
    seed: int = 0

    def effective(self):
        return {
            "experiment": self.experiment,
            "inputs": self.inputs,
            "tolerances": self.tolerances,
            "output_path": self.output_path,
            "seed": self.seed,
        }


@dataclass
class Report:
    experiment: str
    summary: dict
    tables: dict
    passed: bool
    config: ExperimentConfig

    def to_json(self):
        return {
            "experiment": self.experiment,
            "version": __version__,
            "seed": self.config.seed,
            "tolerances": self.config.tolerances,
            "inputs": self.config.inputs,
            "passed": self.passed,
            "results": self.summary,
        }


def parse_config(source, default_experiment=None):
    """Parse a config from a path or inline JSON text.

    Raises
    ------
    ParseError
        On malformed JSON (with line and column) or a bad field (named).
    UnknownExperiment
        If ``experiment`` is not a registered runner.
    """
    text = source
    if not str(source).lstrip().startswith("{"):
        try:
            text = Path(source).read_text()
        except OSError as exc:
            raise ParseError(f"cannot read config {source}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ParseError("config must be a JSON object")
    experiment = doc.get("experiment", default_experiment)
    if experiment is None:
        raise ParseError("missing required field 'experiment'")
    if not isinstance(experiment, str):
        raise ParseError("field 'experiment' must be a string")
    if experiment not in EXPERIMENTS:
        raise UnknownExperiment(f"unknown experiment {experiment!r}; choose from {sorted(EXPERIMENTS)}")
    inputs = doc.get("inputs", {})
    if not isinstance(inputs, dict):
        raise ParseError("field 'inputs' must be an object")
    overrides = doc.get("tolerances", {})
    if not isinstance(overrides, dict):
        raise ParseError("field 'tolerances' must be an object")
    tolerances = dict(DEFAULT_TOLERANCES)
    for key, value in overrides.items():
        if key not in DEFAULT_TOLERANCES:
            raise ParseError(f"tolerances: unknown key {key!r}")
        if not isinstance(value, (int, float)) or isinstance(value, bool) or not value > 0:
            raise ParseError(f"tolerances.{key}: must be a positive number")
        tolerances[key] = float(value)
    seed = doc.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed < 2**64:
        raise ParseError("field 'seed' must be an integer in [0, 2^64)")
    output_path = doc.get("output_path", ".")
    if not isinstance(output_path, str):
        raise ParseError("field 'output_path' must be a string")
    return ExperimentConfig(experiment, inputs, tolerances, output_path, seed)


def _matrix(inputs, key, required=True):
    if key not in inputs:
        if required:
            raise ParseError(f"inputs: missing required field {key!r}")
        return None
    return matrix_from_json(inputs[key], f"inputs.{key}")


def _number(inputs, key, default):
    value = inputs.get(key, default)
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise ParseError(f"inputs.{key}: must be a number")
    return float(value)


def _vector(value, field_name):
    if isinstance(value, dict):
        return matrix_from_json(value, field_name).reshape(-1)
    try:
        arr = np.array(value, dtype=np.float64).reshape(-1)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{field_name}: expected a list of numbers") from exc
    if not np.all(np.isfinite(arr)):
        raise ParseError(f"{field_name}: entries must be finite")
    return arr


def _threads():
    raw = os.environ.get("GENINV_LAB_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _run_mp_sweep(cfg):
    tol = cfg.tolerances
    a = _matrix(cfg.inputs, "A")
    d = _matrix(cfg.inputs, "direction")
    if a.shape != d.shape:
        raise ParseError("inputs.direction: shape must match inputs.A")
    steps = [float(s) for s in cfg.inputs.get("steps", DEFAULT_STEPS)]
    if any(s <= 0 for s in steps) or any(x <= y for x, y in zip(steps, steps[1:])):
        raise ParseError("inputs.steps: must be positive and strictly decreasing")
    mode = cfg.inputs.get("curve", "linear")
    if mode == "linear":
        curve = lambda t: a + t * d  # noqa: E731
    elif mode == "chart":
        point = OperatorPoint.moore_penrose(a)
        d = tangent_space_basis(point).project(d)
        curve = lambda t: chart_inverse(point, a + t * d)  # noqa: E731
    else:
        raise ParseError("inputs.curve: must be 'linear' or 'chart'")
    rows = mp_sweep_curve(a, curve, steps)
    r = rank_of(a, tol["rank_tol"])
    preserving = all(row.rank == r for row in rows)
    errors = [row.mp_error for row in rows]
    monotone = all(x >= y for x, y in zip(errors, errors[1:]))
    if preserving:
        passed = monotone and errors[-1] <= tol["sweep_final_tol"]
    else:
        dnorm = float(np.linalg.norm(curve(steps[0]) - a, 2)) / steps[0]
        passed = all(row.pinv_norm >= 0.5 / (row.t * dnorm) for row in rows)
    summary = {
        "curve": mode,
        "rank_A": r,
        "rank_preserving": preserving,
        "monotone": monotone,
        "final_error": errors[-1],
        "rows": [{"t": row.t, "rank": row.rank, "mp_error": row.mp_error, "pinv_norm": row.pinv_norm} for row in rows],
    }
    table = (["t", "rank", "mp_error"], [(row.t, row.rank, row.mp_error) for row in rows])
    return summary, {"mp_sweep.csv": table}, passed


def _gen_inverse(inputs, a):
    a_plus = _matrix(inputs, "A_plus", required=False)
    if a_plus is not None:
        return GenInverse.from_pair(a, a_plus)
    if "R_plus" in inputs or "N_plus" in inputs:
        if not ("R_plus" in inputs and "N_plus" in inputs):
            raise ParseError("inputs: R_plus and N_plus must be given together")
        r_plus = subspace_from_json(inputs["R_plus"], "inputs.R_plus")
        n_plus = subspace_from_json(inputs["N_plus"], "inputs.N_plus")
        return gen_inverse_from_complements(a, r_plus, n_plus)
    return GenInverse.moore_penrose(a)


def _run_conditions(cfg):
    a = _matrix(cfg.inputs, "A")
    t = _matrix(cfg.inputs, "T")
    g = _gen_inverse(cfg.inputs, a)
    report = check_equivalent_conditions(g, t, tol=cfg.tolerances["residual_tol"])
    b, resid = nashed_chen_inverse(g, t)
    summary = {
        "conditions": report.to_json(),
        "all_equal": report.all_equal,
        "all_true": all(report.verdicts),
        "B": b,
        "tbt_residual": resid,
    }
    return summary, {}, report.all_equal


def _run_conjugacy(cfg):
    name = cfg.inputs.get("map")
    if name not in BUILTIN_MAPS:
        raise ParseError(f"inputs.map: must be one of {sorted(BUILTIN_MAPS)}")
    f, x0 = builtin_map(name)
    if "x0" in cfg.inputs:
        x0 = _vector(cfg.inputs["x0"], "inputs.x0")
    radius = cfg.inputs.get("radius")
    pair = local_conjugacy(f, x0, radius=None if radius is None else float(radius))
    n = int(cfg.inputs.get("samples", 100))
    reach = pair.valid_radius if math.isfinite(pair.valid_radius) else 1.0
    sample_radius = _number(cfg.inputs, "sample_radius", 0.9 * reach)
    if not sample_radius < pair.valid_radius:
        raise ParseError("inputs.sample_radius: must lie below the valid radius")
    rng = np.random.default_rng(cfg.seed)
    dirs = rng.standard_normal((n, f.domain_dim))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    radii = sample_radius * rng.uniform(size=(n, 1)) ** (1.0 / f.domain_dim)
    samples = x0 + radii * dirs
    residual = verify_conjugacy(pair, f, samples)
    g = GenInverse.from_pair(pair.t0, pair.t0_plus)
    fine = is_locally_fine(jacobian_family(f, x0, samples), g)
    tol = cfg.tolerances["conjugacy_tol"]
    summary = {
        "map": name,
        "x0": x0,
        "max_residual": residual,
        "locally_fine": fine.fine,
        "valid_radius": pair.valid_radius,
        "sample_radius": sample_radius,
        "samples": n,
    }
    return summary, {}, (residual <= tol) == fine.fine


def _run_chart(cfg):
    x = _matrix(cfg.inputs, "X")
    g = _gen_inverse({"A_plus": cfg.inputs["X_plus"]} if "X_plus" in cfg.inputs else {}, x)
    point = OperatorPoint.from_gen_inverse(g)
    report = verify_chart_maps_manifold(point, samples=int(cfg.inputs.get("samples", 100)), seed=cfg.seed)
    tol = cfg.tolerances
    passed = (
        report.passed
        and report.roundtrip_max_residual <= tol["roundtrip_tol"]
        and report.tangency_max_residual <= tol["tangency_tol"]
    )
    return report.to_json(), {}, passed


def _family_inputs(cfg):
    name = cfg.inputs.get("family")
    if name not in BUILTIN_FAMILIES:
        raise ParseError(f"inputs.family: must be one of {sorted(BUILTIN_FAMILIES)}")
    family, x0, e_star, exact = builtin_family(name)
    if "x0" in cfg.inputs:
        given = _vector(cfg.inputs["x0"], "inputs.x0")
        if given.shape != x0.shape or not np.array_equal(given, x0):
            # The closed-form solution is only known through the default base point.
            exact = None
        x0 = given
    return name, family, x0, e_star, exact


def _default_paths(v0, target):
    k = v0.size
    if k == 1:
        return [[v0, target], [v0, (v0 + target) / 2, target]]
    corner1 = v0.copy()
    corner1[0] = target[0]
    corner2 = target.copy()
    corner2[0] = v0[0]
    return [[v0, corner1, target], [v0, corner2, target]]


def _run_frobenius(cfg):
    name, family, x0, e_star, exact = _family_inputs(cfg)
    if name not in FAMILY_DEFAULTS:
        # dim M jumps off the fixed-rank set, so RK stages leave the family's domain of constancy.
        raise ParseError(f"inputs.family: {name!r} is only available to the cofinal experiment")
    radius, grid_step, ode_step = FAMILY_DEFAULTS[name]
    radius = _number(cfg.inputs, "radius", radius)
    grid_step = _number(cfg.inputs, "grid_step", grid_step)
    ode_step = _number(cfg.inputs, "ode_step", ode_step)
    frame = split_frame(family, x0, e_star)
    patch = integrate_patch(family, frame, radius, grid_step, ode_step, threads=_threads())
    angle = verify_tangency(patch, family)
    v0 = frame.base_coords[0]
    if "target" in cfg.inputs:
        target = _vector(cfg.inputs["target"], "inputs.target")
    else:
        target = v0 + radius / math.sqrt(v0.size)
    resid = integrability_residual(family, frame, target, _default_paths(v0, target), ode_step)
    tol = cfg.tolerances
    summary = {
        "family": name,
        "max_tangency_angle": angle,
        "integrability_residual": resid,
        "ode_step": ode_step,
        "grid_step": grid_step,
        "radius": radius,
        "grid_points": int(len(patch.grid)),
        "integrable": name in INTEGRABLE,
    }
    if exact is not None:
        summary["max_error"] = float(np.abs(patch.psi_values - exact(patch.grid)).max())
    if name in INTEGRABLE:
        passed = angle <= tol["tangency_tol"] and resid <= tol["residual_tol"]
        if "max_error" in summary:
            passed = passed and summary["max_error"] <= tol["solution_tol"]
    else:
        passed = resid >= tol["nonintegrable_min"]
    k = patch.grid.shape[1]
    header = [f"v{i}" for i in range(k)] + [f"psi{i}" for i in range(patch.psi_values.shape[1])]
    rows = [tuple(g) + tuple(p) for g, p in zip(patch.grid, patch.psi_values)]
    return summary, {"patch.csv": (header, rows)}, passed


def _run_cofinal(cfg):
    name, family, x0, e_star, _ = _family_inputs(cfg)
    frame = split_frame(family, x0, e_star)
    raw_points = cfg.inputs.get("points", [])
    if not isinstance(raw_points, list):
        raise ParseError("inputs.points: must be a list")
    entries = []
    for i, raw in enumerate(raw_points):
        x = _vector(raw, f"inputs.points[{i}]")
        entry = {"point": x}
        try:
            member = cofinal_membership(family, frame, x)
        except DomainError:
            entry.update(in_domain=False, cofinal=False)
        else:
            entry.update(in_domain=True, cofinal=member)
            if member:
                entry["alpha"] = alpha_field(family, frame, x).alpha
        entries.append(entry)
    base_ok = cofinal_membership(family, frame, x0)
    summary = {
        "family": name,
        "x0": x0,
        "dim_m0": frame.dim_m0,
        "dim_e_star": frame.dim_e_star,
        "base_cofinal": base_ok,
        "points": entries,
    }
    return summary, {}, base_ok


EXPERIMENTS = {
    "mp-sweep": _run_mp_sweep,
    "conditions": _run_conditions,
    "conjugacy": _run_conjugacy,
    "chart": _run_chart,
    "frobenius": _run_frobenius,
    "cofinal": _run_cofinal,
}


def run_experiment(config):
    """Run the named experiment and return a :class:`Report` (files are not written)."""
    runner = EXPERIMENTS.get(config.experiment)
    if runner is None:
        raise UnknownExperiment(f"unknown experiment {config.experiment!r}")
    try:
        summary, tables, passed = runner(config)
    except GenInvLabError as exc:
        raise type(exc)(f"{config.experiment}: {exc}") from exc
    return Report(config.experiment, summary, tables, bool(passed), config)


def write_report(report, out_dir):
    """Write ``<experiment>.json`` plus any CSV tables into ``out_dir``; return the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / f"{report.experiment}.json"]
    paths[0].write_text(dumps(report.to_json()))
    for fname, (header, rows) in sorted(report.tables.items()):
        path = out / fname
        path.write_text(csv_table(header, rows))
        paths.append(path)
    return paths


def _list_text():
    lines = ["experiments:"]
    lines += [f"  {name}" for name in EXPERIMENTS]
    lines.append("maps (conjugacy):")
    lines += [f"  {name}" for name in BUILTIN_MAPS]
    lines.append("families (frobenius, cofinal):")
    lines += [f"  {name}" + ("" if name in FAMILY_DEFAULTS else " (cofinal only)") for name in BUILTIN_FAMILIES]
    return "\n".join(lines)


def _build_parser():
    parser = argparse.ArgumentParser(prog="geninv-lab", description="Generalized-inverse experiment runner.")
    parser.add_argument("--version", action="version", version=f"geninv-lab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("list", help="list experiments, built-in maps and families")
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", required=True, help="path to a JSON config, or inline JSON")
        p.add_argument("--check", action="store_true", help="exit 3 if acceptance thresholds are missed")
        p.add_argument("--out", default=None, help="output directory (overrides output_path)")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
    return parser


def main(argv=None):
    args = _build_parser().parse_args(argv)
    if args.command == "list":
        print(_list_text())
        return 0
    try:
        cfg = parse_config(args.config, default_experiment=args.command)
        if cfg.experiment != args.command:
            raise ParseError(f"config experiment {cfg.experiment!r} does not match command {args.command!r}")
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ParseError("--seed must be in [0, 2^64)")
            cfg = ExperimentConfig(cfg.experiment, cfg.inputs, cfg.tolerances, cfg.output_path, args.seed)
        report = run_experiment(cfg)
        paths = write_report(report, args.out if args.out is not None else cfg.output_path)
    except (GenInvLabError, ValueError, KeyError, OSError) as exc:
        print(f"geninv-lab: error: {exc}", file=sys.stderr)
        return 2
    for path in paths:
        print(path)
    status = "PASS" if report.passed else "FAIL"
    print(f"{report.experiment}: {status}")
    if args.check and not report.passed:
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
