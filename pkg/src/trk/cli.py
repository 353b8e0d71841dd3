"""Command line entry point: ``trk monitor``, ``trk synth`` and ``trk verify``.

Exit codes:

    0  success (monitor: formula satisfied; verify: all checks pass)
    1  usage, parse, IO or solver errors; verify: result files missing
    2  monitor: formula violated; verify: a check failed
    3  synth: problem infeasible
    4  synth: solver stopped without a solution (time limit)
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from typing import Optional, Sequence

import numpy as np

from . import backend
from .semantics import (
    HorizonError,
    PredicateSignalSet,
    StateSignal,
    booleanize,
    evaluate_all,
    verify_bound,
    verify_shift_theorem,
)
from .stl import FormulaSyntaxError, PredicateTable, parse
from .synthesis import (
    load_scenario,
    read_trajectory,
    resolve_scenario,
    solve,
    validate,
    write_result,
)

EXIT_OK, EXIT_ERROR, EXIT_FAILED, EXIT_INFEASIBLE, EXIT_TIMEOUT = 0, 1, 2, 3, 4


class CliError(Exception):
    pass


def _load_predicates(path: str) -> PredicateTable:
    with open(path) as fh:
        data = json.load(fh)
    if isinstance(data, dict):
        data = data.get("predicates", [])
    return PredicateTable.from_specs(data)


def load_signal(path: str, predicates: Optional[str] = None) -> tuple[PredicateSignalSet, PredicateTable]:
    """Read a monitor CSV.

    Without ``predicates`` every column but ``t`` is a predicate named by its
    header and holding +-1. With a predicate file the ``x1..xn`` columns
    are a state trajectory that is booleanized against it.
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise CliError(f"{path} is empty")
    header = [h.strip() for h in rows[0]]
    body = [r for r in rows[1:] if any(c.strip() for c in r)]
    if not body:
        raise CliError(f"{path} has no samples")
    cols = [i for i, h in enumerate(header) if h != "t"]
    if "t" in header:
        ts = [int(float(r[header.index("t")])) for r in body]
        if ts != list(range(len(body))):
            raise CliError("column t must count 0, 1, 2, ... without gaps")
    if predicates is None:
        names = [header[i] for i in cols]
        try:
            chi = np.array([[int(float(r[i])) for r in body] for i in cols])
            sigs = PredicateSignalSet(chi)
        except ValueError as exc:
            raise CliError(f"{path}: predicate columns must hold +1/-1 ({exc}); pass --predicates for state signals") from exc
        return sigs, PredicateTable.symbolic(names)
    table = _load_predicates(predicates)
    xcols = [header.index(f"x{d + 1}") for d in range(table.dim) if f"x{d + 1}" in header]
    if len(xcols) != table.dim:
        raise CliError(f"{path} needs columns x1..x{table.dim} for these predicates")
    states = StateSignal([[float(r[i]) for i in xcols] for r in body])
    return booleanize(states, table), table


# -- subcommands -------------------------------------------------------------

def cmd_monitor(args) -> int:
    sigs, table = load_signal(args.signal_file, args.predicates)
    phi = parse(args.formula, table)
    res = evaluate_all(phi, sigs, args.t)
    for key in ("char", "theta", "theta_left", "theta_right"):
        print(f"{key}: {res[key]}")
    return EXIT_OK if res["char"] == 1 else EXIT_FAILED


def cmd_synth(args) -> int:
    path = resolve_scenario(args.scenario)
    problem, cfg = load_scenario(path)
    if args.objective:
        cfg = dict(cfg, objective=args.objective)
        problem, cfg = load_scenario(cfg)
    kwargs = {"time_limit_seconds": args.time_limit} if args.time_limit else {}
    config = backend.SolverConfig.from_env(args.solver_cmd, **kwargs)
    name = os.path.splitext(os.path.basename(path))[0]
    out_dir = args.out_dir or os.path.join("results", name)
    os.makedirs(out_dir, exist_ok=True)
    result = solve(problem, config, lp_path=os.path.join(out_dir, "model.lp"))
    report = validate(result, problem) if result.trajectory is not None else None
    write_result(out_dir, cfg, problem, result, report)
    print(f"status: {result.status}")
    print(f"solve_seconds: {result.solve_seconds:.2f}")
    if result.status == "infeasible":
        return EXIT_INFEASIBLE
    if result.status == "timeout":
        return EXIT_TIMEOUT
    if report is None:
        print(f"solver error: {result.message}", file=sys.stderr)
        return EXIT_ERROR
    print(f"objective ({problem.objective}): {result.objective_value}")
    print("cross_eval: " + ", ".join(f"{k}={v}" for k, v in zip(("theta", "theta_left", "theta_right"), report["cross_eval"])))
    print(f"validation: objective_consistent={report['objective_consistent']} char_holds={report['char_holds']}")
    print(f"results: {out_dir}")
    return EXIT_OK


def cmd_verify(args) -> int:
    d = args.result_dir
    needed = [os.path.join(d, f) for f in ("scenario.json", "summary.json", "trajectory.csv")]
    missing = [p for p in needed if not os.path.exists(p)]
    if missing:
        print("missing result files: " + ", ".join(missing), file=sys.stderr)
        return EXIT_ERROR
    problem, _ = load_scenario(needed[0])
    with open(needed[1]) as fh:
        summary = json.load(fh)
    states, inputs = read_trajectory(needed[2], problem.system.n)
    if states.H != problem.H:
        raise CliError(f"trajectory has {states.H + 1} samples, expected {problem.H + 1}")
    sigs = booleanize(states, problem.table, tol=problem.epsilon / 2)
    res = evaluate_all(problem.phi, sigs, 0)
    kind = summary.get("objective_kind", problem.objective)
    shift = verify_shift_theorem(problem.phi, sigs, 0)
    checks = {
        "char_holds": res["char"] == 1,
        "objective_consistent": summary.get("objective") == res[kind],
        "bound": verify_bound(problem.phi, sigs, 0),
        "shift_theorem": shift.ok,
    }
    if inputs.shape == (problem.H, problem.system.m):
        err = float(np.max(np.abs(problem.system.simulate(inputs) - states.states)))
        checks["dynamics"] = err <= 1e-6 * max(1.0, float(np.max(np.abs(states.states))))
    for key in ("char", "theta", "theta_left", "theta_right"):
        print(f"{key}: {res[key]}")
    mode = "exhaustive" if shift.exhaustive else "sampled"
    print(f"shift_theorem: radius={shift.radius} checked={shift.checked} ({mode}) violations={len(shift.violations)}")
    for name, ok in checks.items():
        print(f"{name}: {'pass' if ok else 'FAIL'}")
    return EXIT_OK if all(checks.values()) else EXIT_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trk", description="Time robustness of STL specifications: monitoring and control synthesis.")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("monitor", help="evaluate a formula on a signal file")
    p.add_argument("signal_file", help="CSV with t and +-1 predicate columns, or t,x1..xn with --predicates")
    p.add_argument("formula")
    p.add_argument("--t", type=int, default=0, help="evaluation time (default 0)")
    p.add_argument("--predicates", help="JSON predicate list or scenario file; makes SIGNAL_FILE a state trajectory")
    p.set_defaults(func=cmd_monitor)

    p = sub.add_parser("synth", help="solve a synthesis scenario")
    p.add_argument("scenario", help="scenario JSON path or bundled name, e.g. scenario1_theta")
    p.add_argument("--solver-cmd", help=f"solver command template (default ${backend.ENV_VAR} or the bundled HiGHS runner)")
    p.add_argument("--time-limit", type=float, help="solver time limit in seconds (default 1800)")
    p.add_argument("--out-dir", help="result directory (default results/<scenario>)")
    p.add_argument("--objective", choices=("theta", "left", "right"), help="override the scenario objective")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("verify", help="re-check a synthesis result directory")
    p.add_argument("result_dir")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (CliError, FormulaSyntaxError, HorizonError, backend.SolverError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
