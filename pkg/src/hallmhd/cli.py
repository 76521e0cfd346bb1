"""Batch front end: config parsing, the three study scenarios, output files.

The config is one JSON document; `--set key=value` flags override single
entries by dotted path.  Heavy imports happen inside functions so the
thread cap from HALLMHD_THREADS can take effect before the numerics
stack loads.
"""

import argparse
import copy
import csv
import json
import math
import os
import sys
from dataclasses import dataclass

from .errors import ConfigError, HallMHDError

SCENARIOS = (
    "temporal_convergence",
    "spatial_convergence",
    "structure_preservation",
    "custom",
)
RUN_SCENARIOS = ("structure_preservation", "custom")
SWEEP_SCENARIOS = ("temporal_convergence", "spatial_convergence")

# key -> type, or a nested dict for sections; None means nullable int
_SCHEMA = {
    "scenario": str,
    "output_dir": str,
    "K": int,
    "N": int,
    "domain": {"lo": list, "hi": list},
    "mapping": {"kind": str, "c": float},
    "params": {
        "dt": float,
        "T": float,
        "R_f": float,
        "R_m": float,
        "c_lorentz": float,
        "h_hall": float,
        "ideal_mode": bool,
    },
    "grid": list,
    "full_paper": bool,
    "initial": str,
    "vtk_cadence": int,
    "vtk_samples": int,
    "solver": str,
}

_UNIT_DOMAIN = {"lo": [0.0, 0.0, 0.0], "hi": [1.0, 1.0, 1.0]}
_BOX_DOMAIN = {"lo": [0.0, 0.0, 0.0], "hi": [2 * math.pi] * 3}

_TEMPORAL_GRID = [[2, 4, 1 / 4], [2, 4, 1 / 8], [2, 4, 1 / 16]]
_TEMPORAL_GRID_PAPER = [[3, 6, 1 / d] for d in range(9, 15)]
_SPATIAL_GRID = [[1, 4, 1 / 100], [1, 6, 1 / 100], [1, 8, 1 / 100]]
_SPATIAL_GRID_PAPER = [[1, K, 1 / 100] for K in range(16, 27, 2)] + [
    [2, K, 1 / 100] for K in range(12, 19, 2)
]


def _scenario_defaults(scenario):
    common = {
        "scenario": scenario,
        "output_dir": "out",
        "vtk_cadence": 0,
        "vtk_samples": None,
        "solver": "direct",
    }
    if scenario == "structure_preservation":
        return {
            **common,
            "K": 9,
            "N": 2,
            "domain": copy.deepcopy(_UNIT_DOMAIN),
            "mapping": {"kind": "crazy", "c": 0.1},
            "params": {
                "dt": 0.01,
                "T": 1.0,
                "R_f": 100.0,
                "R_m": 100.0,
                "c_lorentz": 1.0,
                "h_hall": 1.0,
                "ideal_mode": False,
            },
            "initial": "structure",
        }
    if scenario in SWEEP_SCENARIOS:
        temporal = scenario == "temporal_convergence"
        return {
            **common,
            "full_paper": False,
            "grid": copy.deepcopy(_TEMPORAL_GRID if temporal else _SPATIAL_GRID),
            "params": {
                "dt": 0.25 if temporal else 0.01,
                "T": 1.0 if temporal else 0.1,
                "R_f": 1.0,
                "R_m": 1.0,
                "c_lorentz": 1.0,
                "h_hall": 1.0,
                "ideal_mode": False,
            },
        }
    # custom: only plumbing defaults; physics must be explicit
    return {
        **common,
        "domain": copy.deepcopy(_UNIT_DOMAIN),
        "mapping": {"kind": "identity-affine", "c": 0.0},
        "initial": "structure",
    }


@dataclass(frozen=True)
class RunConfig:
    """A fully resolved and validated run configuration."""

    scenario: str
    output_dir: str
    resolved: dict
    K: int = 0
    N: int = 0
    domain: tuple = ()
    mapping: tuple = ()
    params: object = None
    grid: tuple = ()
    initial: str = ""
    vtk_cadence: int = 0
    vtk_samples: object = None
    solver: str = "direct"


def _deep_update(base, extra, path=""):
    node = _walk_schema(path)
    for key, value in extra.items():
        here = f"{path}.{key}" if path else key
        if key not in node:
            raise ConfigError(f"unknown config key {here!r}")
        if isinstance(node[key], dict) and isinstance(value, dict):
            base.setdefault(key, {})
            _deep_update(base[key], value, here)
        else:
            base[key] = value
    return base


def _walk_schema(path):
    node = _SCHEMA
    for part in [p for p in path.split(".") if p]:
        node = node[part]
    return node


def _coerce(merged):
    """Type-check the merged document against the schema, in place."""

    def check(node, doc, path):
        for key, value in doc.items():
            here = f"{path}.{key}" if path else key
            if key not in node:
                raise ConfigError(f"unknown config key {here!r}")
            spec = node[key]
            if isinstance(spec, dict):
                if not isinstance(value, dict):
                    raise ConfigError(f"{here!r} must be a section")
                check(spec, value, here)
            elif value is None:
                if key != "vtk_samples":
                    raise ConfigError(f"{here!r} must not be null")
            elif spec is float:
                if isinstance(value, bool) or not isinstance(value, (int, float)):
                    raise ConfigError(f"{here!r} must be a number")
                doc[key] = float(value)
            elif spec is int:
                if isinstance(value, bool) or not isinstance(value, int):
                    raise ConfigError(f"{here!r} must be an integer")
            elif spec is bool:
                if not isinstance(value, bool):
                    raise ConfigError(f"{here!r} must be true or false")
            elif spec is str:
                if not isinstance(value, str):
                    raise ConfigError(f"{here!r} must be a string")
            elif spec is list:
                if not isinstance(value, list):
                    raise ConfigError(f"{here!r} must be a list")

    check(_SCHEMA, merged, "")


def _parse_override(text):
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not of the form key=value")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    doc = {}
    node = doc
    parts = key.split(".")
    for part in parts[:-1]:
        node[part] = {}
        node = node[part]
    node[parts[-1]] = value
    return doc


def parse_config(path, overrides=()):
    """Read, override, validate, and resolve one configuration file."""
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}")
    if not text.strip():
        raise ConfigError("empty config: 'scenario' is required")
    try:
        user = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}")
    if not isinstance(user, dict):
        raise ConfigError("config must be a JSON object")

    for text in overrides:
        _deep_update(user, _parse_override(text), "")

    scenario = user.get("scenario")
    if scenario is None:
        raise ConfigError("'scenario' is required")
    if scenario not in SCENARIOS:
        raise ConfigError(
            f"unknown scenario {scenario!r}; expected one of {', '.join(SCENARIOS)}"
        )

    merged = _scenario_defaults(scenario)
    _deep_update(merged, user, "")
    _coerce(merged)
    return _resolve(merged)


def _resolve(doc):
    from .mesh import BoxDomain, MappingSpec
    from .scheme import SchemeParams

    scenario = doc["scenario"]
    if doc.get("full_paper") and scenario in SWEEP_SCENARIOS:
        paper = (
            _TEMPORAL_GRID_PAPER
            if scenario == "temporal_convergence"
            else _SPATIAL_GRID_PAPER
        )
        if doc["grid"] == (_TEMPORAL_GRID if scenario == "temporal_convergence"
                           else _SPATIAL_GRID):
            doc["grid"] = copy.deepcopy(paper)

    if scenario in SWEEP_SCENARIOS:
        stray = [k for k in ("K", "N", "domain", "mapping", "initial") if k in doc]
    else:
        stray = [k for k in ("grid", "full_paper") if k in doc]
    if stray:
        raise ConfigError(
            f"{stray[0]!r} does not apply to scenario {scenario}"
        )

    if doc["solver"] not in ("direct", "iterative"):
        raise ConfigError(f"solver must be direct or iterative, got {doc['solver']!r}")
    if doc.get("vtk_cadence", 0) < 0:
        raise ConfigError("vtk_cadence must be >= 0")
    samples = doc.get("vtk_samples")
    if samples is not None and samples < 2:
        raise ConfigError("vtk_samples must be at least 2")

    pdoc = doc.get("params")
    if pdoc is None:
        raise ConfigError("'params' section with dt and T is required")
    missing = [k for k in ("dt", "T") if k not in pdoc]
    if missing:
        raise ConfigError(f"params.{missing[0]} is required")
    try:
        params = SchemeParams(**pdoc)
    except ValueError as exc:
        raise ConfigError(f"params: {exc}")

    grid = ()
    domain = None
    mapping = None
    if scenario in SWEEP_SCENARIOS:
        entries = []
        for i, entry in enumerate(doc["grid"]):
            if (
                not isinstance(entry, list)
                or len(entry) != 3
                or not all(isinstance(v, (int, float)) for v in entry)
            ):
                raise ConfigError(f"grid[{i}] must be [N, K, dt]")
            N, K, dt = int(entry[0]), int(entry[1]), float(entry[2])
            if N < 1 or K < 1 or dt <= 0:
                raise ConfigError(f"grid[{i}] must have N >= 1, K >= 1, dt > 0")
            entries.append((N, K, dt))
        grid = tuple(entries)
        K = N = 0
    else:
        if "K" not in doc or "N" not in doc:
            raise ConfigError(f"scenario {scenario} requires K and N")
        K, N = doc["K"], doc["N"]
        if K < 1 or N < 1:
            raise ConfigError("K and N must be at least 1")
        try:
            domain = BoxDomain(tuple(doc["domain"]["lo"]), tuple(doc["domain"]["hi"]))
            mapping = MappingSpec(doc["mapping"]["kind"], doc["mapping"]["c"])
        except ValueError as exc:
            raise ConfigError(str(exc))
        initial = doc["initial"]
        if initial not in ("structure", "mms"):
            raise ConfigError(f"initial must be structure or mms, got {initial!r}")
        want = _UNIT_DOMAIN if initial == "structure" else _BOX_DOMAIN
        got = [list(domain.lo), list(domain.hi)]
        if not all(
            abs(a - b) < 1e-12
            for ga, wa in zip(got, (want["lo"], want["hi"]))
            for a, b in zip(ga, wa)
        ):
            raise ConfigError(
                f"initial {initial!r} is defined on "
                f"[{want['lo'][0]:g}, {want['hi'][0]:g}]^3; set domain accordingly"
            )

    return RunConfig(
        scenario=scenario,
        output_dir=doc["output_dir"],
        resolved=doc,
        K=K,
        N=N,
        domain=domain,
        mapping=mapping,
        params=params,
        grid=grid,
        initial=doc.get("initial", ""),
        vtk_cadence=doc.get("vtk_cadence", 0),
        vtk_samples=samples,
        solver=doc["solver"],
    )


# ----------------------------------------------------------------------
# execution
# ----------------------------------------------------------------------


def structure_initial(points, t):
    """Divergence-free initial field with zero tangential trace on [0,1]^3."""
    import numpy as np

    x = points[..., 0]
    y = points[..., 1]
    z = points[..., 2]
    ux = z * (z - 1.0) * np.cos(math.pi * x) * np.sin(math.pi * y)
    uy = z * (1.0 - z) * np.sin(math.pi * x) * np.cos(math.pi * y)
    return np.stack(np.broadcast_arrays(ux, uy, np.zeros_like(ux)), axis=-1)


def _write_errors_csv(rows, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["N", "K", "dt", "variable", "error"])
        for N, K, dt, variable, error in rows:
            writer.writerow([N, K, repr(dt), variable, repr(error)])


def _execute_run(config):
    from .assembly import interpolate
    from .derham import build_complex
    from .diagnostics import write_diagnostics_csv
    from .mesh import build_mesh
    from .mms import build_case, l2_error
    from .scheme import SourceSpec, run
    from .vtk import write_vtk

    mesh = build_mesh(config.K, config.domain, config.mapping)
    cx = build_complex(mesh, config.N)
    if config.initial == "structure":
        case = None
        sources = None
        u0 = interpolate(cx, "D", structure_initial)
        B0 = interpolate(cx, "D", structure_initial)
        H0 = interpolate(cx, "C0", structure_initial)
    else:
        case = build_case(config.params)
        sources = SourceSpec(f=case.f, m=case.m)
        u0 = interpolate(cx, "D", case.u, 0.0)
        B0 = interpolate(cx, "D", case.B, 0.0)
        H0 = interpolate(cx, "C0", case.B, 0.0)

    cadence = config.vtk_cadence

    def on_iteration(state, record):
        if cadence > 0 and state.k % cadence == 0:
            write_vtk(
                cx,
                {"u": state.u, "B": state.B, "H": state.H, "P": state.P},
                os.path.join(config.output_dir, "fields_%04d.vtk" % state.k),
                samples=config.vtk_samples,
            )

    state, records = run(
        cx,
        config.params,
        u0=u0,
        B0=B0,
        sources=sources,
        H0=H0,
        on_iteration=on_iteration,
        solver=config.solver,
    )
    write_diagnostics_csv(records, os.path.join(config.output_dir, "diagnostics.csv"))

    if case is not None and records:
        half = 0.5 * config.params.dt
        pairs = [
            ("u", state.u, case.u, state.t),
            ("B", state.B, case.B, state.t),
            ("H", state.H, case.B, state.t + half),
            ("omega", state.omega, case.omega, state.t),
            ("j", state.j, case.j, state.t),
            ("P", state.P, case.P, state.t - half),
            ("E", state.E, case.E, state.t - half),
        ]
        rows = [
            (config.N, config.K, config.params.dt, name, l2_error(cx, fld, exact, t))
            for name, fld, exact, t in pairs
        ]
        _write_errors_csv(rows, os.path.join(config.output_dir, "errors.csv"))

    if records:
        last = records[-1]
        print(
            "completed %d iterations to t=%g; total energy %.6e, "
            "max divergences (u, B, jH) = (%.3e, %.3e, %.3e)"
            % (
                len(records),
                state.t,
                last.total,
                max(r.div_u for r in records),
                max(r.div_B for r in records),
                max(r.div_jH for r in records),
            )
        )
    else:
        print("horizon shorter than half a step; no iterations performed")
    return 0


def _execute_sweep(config):
    from .mms import convergence_sweep, fit_orders

    axis = "temporal" if config.scenario == "temporal_convergence" else "spatial"
    by_degree = {}
    for entry in config.grid:
        by_degree.setdefault(entry[0], []).append(entry)

    all_reports = []
    for N in sorted(by_degree):
        reports, orders = convergence_sweep(axis, by_degree[N], config.params)
        all_reports.extend(reports)
        for var in sorted(orders):
            print("N=%d %s: fitted %s order %.3f" % (N, var, axis, orders[var]))

    rows = [
        (r.N, r.K, r.dt, var, r.errors[var])
        for r in all_reports
        for var in sorted(r.errors)
    ]
    _write_errors_csv(rows, os.path.join(config.output_dir, "errors.csv"))
    return 0


def execute(config):
    """Run one resolved configuration; returns a process exit status."""
    os.makedirs(config.output_dir, exist_ok=True)
    with open(os.path.join(config.output_dir, "config.resolved.json"), "w") as fh:
        json.dump(config.resolved, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if config.scenario in SWEEP_SCENARIOS:
        return _execute_sweep(config)
    return _execute_run(config)


# ----------------------------------------------------------------------
# entry point
# ----------------------------------------------------------------------


def _apply_thread_cap():
    cap = os.environ.get("HALLMHD_THREADS")
    if cap is None:
        return
    if not cap.isdigit() or int(cap) < 1:
        raise ConfigError("HALLMHD_THREADS must be a positive integer")
    for var in (
        "OMP_NUM_THREADS",
        "OPENBLAS_NUM_THREADS",
        "MKL_NUM_THREADS",
        "NUMEXPR_NUM_THREADS",
    ):
        os.environ.setdefault(var, cap)


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="hallmhd",
        description="Structure-preserving Hall-MHD simulation runner",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="execute one simulation")
    p_run.add_argument("--config", required=True)
    p_run.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override one config entry by dotted path",
    )
    p_sweep = sub.add_parser("sweep", help="execute a convergence sweep")
    p_sweep.add_argument("--config", required=True)
    args = parser.parse_args(argv)

    try:
        _apply_thread_cap()
        config = parse_config(args.config, getattr(args, "overrides", []))
        if args.command == "run" and config.scenario not in RUN_SCENARIOS:
            raise ConfigError(
                f"scenario {config.scenario!r} needs the sweep subcommand"
            )
        if args.command == "sweep" and config.scenario not in SWEEP_SCENARIOS:
            raise ConfigError(
                f"scenario {config.scenario!r} needs the run subcommand"
            )
        return execute(config)
    except (HallMHDError, OSError) as exc:
        print(f"hallmhd: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
