"""Command-line front end.

Subcommands cover the pipeline end to end: ``solve`` / ``grid`` /
``sweep`` / ``compare`` run scenario files, ``koopman`` builds the
generator matrix for inspection, ``invert`` inverts a stored polynomial
map, ``oracle`` answers with the direct solvers only.

Outputs are written to a directory: ``report.json`` always, plus
``trajectory.csv`` (single solves with verification) or ``summary.csv``
(batch runs).  Identical scenario files give byte-identical outputs:
floats serialize by shortest round-trip repr, no timestamps or machine
identifiers are embedded, and per-stage wall-clock timings are kept out
of the files (they stay available on the in-memory reports).

Exit codes: 0 success, 2 scenario or argument validation, 3 numerical
failure (message carries the failing stage).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .koopman import KoopmanDecompositionError, KoopmanModel
from .mapinv import MapInversionError, invert_map
from .oracles import OracleError
from .polynomial import PolyMap
from .scenario import (DEFAULT_ORDER, Pipeline, Scenario, ScenarioError,
                       build_problem, grid_starts, run_compare, run_grid,
                       run_sweep)
from .basis import BasisSpec

PROG = "koopctl"


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.seed is not None:
        np.random.seed(args.seed)
    try:
        scenario = _load_scenario(args)
    except ScenarioError as exc:
        print(f"{PROG}: scenario validation failed: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"{PROG}: cannot read scenario: {exc}", file=sys.stderr)
        return 2
    try:
        return args.func(args, scenario)
    except OracleError as exc:
        return _numerical_failure("integration", exc)
    except KoopmanDecompositionError as exc:
        return _numerical_failure("spectral-decomposition", exc)
    except MapInversionError as exc:
        return _numerical_failure("map-inversion", exc)
    except np.linalg.LinAlgError as exc:
        return _numerical_failure("linear-algebra", exc)
    except ScenarioError as exc:
        print(f"{PROG}: scenario validation failed: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        # runtime domain violations (schema validation already passed)
        return _numerical_failure("evaluation", exc)


def _numerical_failure(stage: str, exc: Exception) -> int:
    print(f"{PROG}: numerical failure at stage {stage}: {exc}",
          file=sys.stderr)
    return 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=PROG,
        description="Polynomial transition-map solver for two-point "
                    "boundary-value problems")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, scenario_required=True):
        p.add_argument("--scenario", required=scenario_required,
                       help="scenario JSON file")
        p.add_argument("--out", help="output directory (default from the "
                                     "scenario, else the working directory)")
        p.add_argument("--order", type=int,
                       help="override the basis truncation order")
        p.add_argument("--solver", choices=("koopman", "stm-oracle",
                                            "shooting"),
                       help="override the scenario's solver")
        p.add_argument("--seed", type=int,
                       help="seed for randomized utilities (recorded in "
                            "the report)")

    p = sub.add_parser("solve", help="solve one boundary-value problem")
    common(p)
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("grid", help="solve every start in the grid block, "
                                    "sharing one inverted map")
    common(p)
    p.set_defaults(func=_cmd_grid)

    p = sub.add_parser("sweep", help="solve over the tf_list block")
    common(p)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("compare", help="run the compare block: two models, "
                                       "shared boundary problem")
    common(p)
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("koopman", help="generator-matrix utilities")
    ksub = p.add_subparsers(dest="subcommand", required=True)
    kb = ksub.add_parser("build", help="build the generator matrix and "
                                       "write it as JSON")
    common(kb)
    kb.set_defaults(func=_cmd_koopman_build)

    p = sub.add_parser("invert", help="invert a polynomial map JSON")
    p.add_argument("--map", required=True, dest="map_path",
                   help="forward map JSON (a components list)")
    p.add_argument("--order", type=int, required=True,
                   help="truncation order of the inverse")
    p.add_argument("--out", help="output directory")
    p.add_argument("--scenario", help=argparse.SUPPRESS)
    p.add_argument("--seed", type=int, help=argparse.SUPPRESS)
    p.add_argument("--solver", help=argparse.SUPPRESS)
    p.set_defaults(func=_cmd_invert)

    p = sub.add_parser("oracle", help="solve with the direct methods only")
    common(p)
    p.set_defaults(func=_cmd_oracle)
    return parser


def _load_scenario(args) -> Scenario | None:
    if getattr(args, "scenario", None) is None:
        return None
    scenario = Scenario.from_file(args.scenario)
    if getattr(args, "order", None) is not None:
        if args.order < 2:
            raise ScenarioError("--order must be at least 2")
        scenario.max_order = args.order
    if getattr(args, "solver", None) is not None:
        scenario.solver = args.solver
    return scenario


def _out_dir(args, scenario: Scenario | None) -> Path:
    out = args.out or (scenario.out if scenario else None) or "."
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _scenario_echo(scenario: Scenario) -> dict:
    echo = {
        "model": scenario.model,
        "model_params": scenario.model_params,
        "xf": list(map(float, scenario.xf)),
        "tf": scenario.tf,
        "max_order": scenario.max_order,
        "solver": scenario.solver,
        "version": scenario.version,
    }
    if scenario.x0 is not None:
        echo["x0"] = list(map(float, scenario.x0))
    if scenario.grid is not None:
        echo["grid"] = scenario.grid
    if scenario.tf_list is not None:
        echo["tf_list"] = [float(t) for t in scenario.tf_list]
    if scenario.compare is not None:
        echo["compare"] = scenario.compare
    return echo


def _strip_timings(obj):
    """Remove wall-clock timings so serialized reports are reproducible."""
    if isinstance(obj, dict):
        return {k: _strip_timings(v) for k, v in obj.items()
                if k != "timings"}
    if isinstance(obj, list):
        return [_strip_timings(v) for v in obj]
    return obj


def _write_report(out: Path, payload: dict, args) -> None:
    if args.seed is not None:
        payload["seed"] = args.seed
    with open(out / "report.json", "w") as fh:
        json.dump(_strip_timings(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_summary(out: Path, header: list[str], rows: list[list]) -> None:
    with open(out / "summary.csv", "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_csv_cell(v) for v in row) + "\n")


def _csv_cell(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _cmd_solve(args, scenario: Scenario) -> int:
    out = _out_dir(args, scenario)
    report, traj = Pipeline().solve(scenario)
    _write_report(out, {"kind": "solve", "scenario": _scenario_echo(scenario),
                        "report": report.to_dict()}, args)
    if traj is not None:
        traj.to_csv(out / "trajectory.csv")
    _print_solve_line(report, scenario)
    return 0


def _print_solve_line(report, scenario: Scenario) -> None:
    bits = [f"solver={report.solver}"]
    if scenario.model == "cw" and report.position_error_m is not None:
        bits.append(f"terminal_position_error={report.position_error_m:.6g} m")
    elif report.terminal is not None:
        bits.append(f"terminal_error={report.terminal['absolute']:.6g}")
    if report.cached_map:
        bits.append("cached map")
    print("  ".join(bits))


def _cmd_grid(args, scenario: Scenario) -> int:
    out = _out_dir(args, scenario)
    result = run_grid(scenario)
    _write_report(out, {"kind": "grid",
                        "scenario": _scenario_echo(scenario),
                        "result": result}, args)
    prob = build_problem(scenario.model, scenario.model_params)
    names = prob.state_names()
    m = prob.n_states
    header = (["index", "status"] + [f"x0_{n}" for n in names[:m]]
              + [f"lam0_{n}" for n in names[:m]]
              + ["terminal_abs", "position_error_m"]
              + [f"effort_{n}" for n in names[:m]])
    rows = []
    for p in result["points"]:
        row = [p["index"], p["status"]] + [float(v) for v in p["x0"]]
        if p["status"] == "ok":
            r = p["report"]
            row += [float(v) for v in r["lam0"]]
            row += [float(r["terminal_error"]["absolute"]),
                    float(r["position_error_m"])]
            row += [float(v) for v in r["control_effort"]]
        else:
            row += [""] * (2 * m + 2)
        rows.append(row)
    _write_summary(out, header, rows)
    print(f"grid: {result['succeeded']}/{result['count']} solved")
    return 0 if result["succeeded"] == result["count"] else 3


def _cmd_sweep(args, scenario: Scenario) -> int:
    out = _out_dir(args, scenario)
    result = run_sweep(scenario)
    _write_report(out, {"kind": "sweep",
                        "scenario": _scenario_echo(scenario),
                        "result": result}, args)
    prob = build_problem(scenario.model, scenario.model_params)
    names = prob.state_names()
    m = prob.n_states
    header = (["tf", "status"] + [f"lam0_{n}" for n in names[:m]]
              + ["terminal_abs"] + [f"effort_{n}" for n in names[:m]])
    rows = []
    for p in result["points"]:
        row = [float(p["tf"]), p["status"]]
        if p["status"] == "ok":
            r = p["report"]
            row += [float(v) for v in r["lam0"]]
            row += [float(r["terminal_error"]["absolute"])]
            row += [float(v) for v in r["control_effort"]]
        else:
            row += [""] * (2 * m + 1)
        rows.append(row)
    _write_summary(out, header, rows)
    mono = result["efforts_non_increasing"]
    print(f"sweep: {result['succeeded']}/{result['count']} solved, "
          f"efforts non-increasing: {mono}")
    return 0 if result["succeeded"] == result["count"] else 3


def _cmd_compare(args, scenario: Scenario) -> int:
    out = _out_dir(args, scenario)
    result = run_compare(scenario)
    payload = dict(result)
    series = payload["uncontrolled_divergence_m"]
    times = series.pop("times_s")
    seps = series.pop("separation_m")
    _write_report(out, {"kind": "compare",
                        "scenario": _scenario_echo(scenario),
                        "result": payload}, args)
    _write_summary(out, ["t_s", "separation_m"],
                   [[float(t), float(s)] for t, s in zip(times, seps)])
    print(f"compare: uncontrolled divergence {series['final']:.6g} m, "
          f"controlled a {result['controlled']['a']['terminal_position_error_m']:.6g} m, "
          f"b {result['controlled']['b']['terminal_position_error_m']:.6g} m")
    return 0


def _cmd_koopman_build(args, scenario: Scenario) -> int:
    out = _out_dir(args, scenario)
    prob = build_problem(scenario.model, scenario.model_params)
    order = scenario.max_order or DEFAULT_ORDER[prob.family]
    starts = ([prob.to_model_state(s) for s in grid_starts(scenario)]
              if scenario.grid else [prob.to_model_state(scenario.x0)])
    tfm = prob.to_model_time(scenario.tf)
    xfm = prob.to_model_state(scenario.xf)
    pipe = Pipeline()
    box = pipe._probe_box(prob, starts, xfm, tfm, scenario.half_widths)
    model = KoopmanModel.build(prob.system.dynamics,
                               BasisSpec(prob.system.dim, order), box)
    eig = np.linalg.eigvals(model.K)
    payload = {
        "basis": {
            "dim": model.spec.dim,
            "max_order": model.spec.max_order,
            "indices": [list(idx) for idx in model.spec.indices],
        },
        "box": model.box.to_dict(),
        "K": [[float(v) for v in row] for row in model.K],
        "H": [[float(v) for v in row] for row in model.H],
        "eigenvalues": sorted(([float(z.real), float(z.imag)] for z in eig)),
        "diagnostics": model.diagnostics,
        "mode": model.mode,
    }
    with open(out / "koopman.json", "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"koopman: basis size {model.spec.size}, mode {model.mode}, "
          f"max row residual {model.diagnostics['max_row_residual']:.3e}")
    return 0


def _cmd_invert(args, scenario=None) -> int:
    try:
        with open(args.map_path) as fh:
            data = json.load(fh)
    except OSError as exc:
        print(f"{PROG}: cannot read map: {exc}", file=sys.stderr)
        return 2
    except json.JSONDecodeError as exc:
        print(f"{PROG}: map is not valid JSON: {exc}", file=sys.stderr)
        return 2
    try:
        forward = PolyMap.from_dict(data)
    except (KeyError, ValueError, TypeError) as exc:
        print(f"{PROG}: bad map structure: {exc}", file=sys.stderr)
        return 2
    out = _out_dir(args, None)
    inverse, residual = invert_map(forward, args.order)
    payload = {"inverse": inverse.to_dict(), "residual": float(residual),
               "trunc_order": args.order}
    with open(out / "inverse.json", "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"invert: round-trip residual {residual:.3e}")
    return 0


def _cmd_oracle(args, scenario: Scenario) -> int:
    if scenario.solver == "koopman":
        scenario.solver = "stm-oracle" if args.solver is None else args.solver
    return _cmd_solve(args, scenario)


if __name__ == "__main__":
    sys.exit(main())
