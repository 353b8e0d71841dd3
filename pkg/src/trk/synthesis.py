"""Temporally robust control synthesis for discrete-time linear systems.

Maximizes a chosen time-robustness objective of an STL formula over the
trajectory of ``x_{t+1} = A x_t + B u_t`` with box state constraints,
``|u_t|_inf <= u_max`` and the formula required to hold at time 0.
"""

from __future__ import annotations

import csv
import json
import math
import os
import time
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional

import numpy as np

from . import backend as backend_mod
from .encoding import EncodingContext, encode_formula_bool, encode_formula_theta
from .milp import LinearExpr, Model, VarKind, export_lp, var
from .semantics import KINDS, HorizonError, Kind, StateSignal, booleanize, char, robustness
from .stl import Formula, PredicateTable, check_against, formula_length, parse, to_string

OBJECTIVE_ALIASES = {
    "theta": "theta",
    "left": "theta_left",
    "theta_left": "theta_left",
    "right": "theta_right",
    "theta_right": "theta_right",
}


def time_big_m(H: int) -> float:
    """Big-M that dominates the spread of any two robustness values in ``[-(H+1), H+1]``."""
    return 2 * H + 3


@dataclass
class LinearSystem:
    A: np.ndarray
    B: np.ndarray
    state_box: np.ndarray  # (n, 2) rows of [lo, hi]
    input_bound: float
    x0: np.ndarray

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.B = np.asarray(self.B, dtype=float)
        if self.B.ndim == 1:
            self.B = self.B[:, None]
        self.state_box = np.asarray(self.state_box, dtype=float)
        self.x0 = np.asarray(self.x0, dtype=float)
        n = self.A.shape[0]
        if self.A.shape != (n, n):
            raise ValueError(f"A must be square, got {self.A.shape}")
        if self.B.shape[0] != n:
            raise ValueError(f"B has {self.B.shape[0]} rows, A has {n}")
        if self.state_box.shape != (n, 2) or np.any(self.state_box[:, 0] > self.state_box[:, 1]):
            raise ValueError("state_box must be n rows of [lo, hi] with lo <= hi")
        if self.x0.shape != (n,):
            raise ValueError(f"x0 must have length {n}")
        if self.input_bound < 0:
            raise ValueError("input bound must be nonnegative")
        if np.any(self.x0 < self.state_box[:, 0]) or np.any(self.x0 > self.state_box[:, 1]):
            raise ValueError("x0 lies outside the state box")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    def simulate(self, inputs: np.ndarray) -> np.ndarray:
        xs = [self.x0]
        for u in np.atleast_2d(inputs):
            xs.append(self.A @ xs[-1] + self.B @ u)
        return np.array(xs)


@dataclass
class SynthesisProblem:
    system: LinearSystem
    phi: Formula
    table: PredicateTable
    H: int
    objective: Kind = "theta"
    epsilon: float = 1e-6

    def __post_init__(self):
        self.objective = OBJECTIVE_ALIASES.get(self.objective, self.objective)
        if self.objective not in KINDS:
            raise ValueError(f"unknown objective {self.objective!r}")
        if formula_length(self.phi) > self.H:
            raise HorizonError(f"formula length {formula_length(self.phi)} exceeds horizon {self.H}")
        if self.table.dim != self.system.n:
            raise ValueError(f"predicates are over dimension {self.table.dim}, the system state has {self.system.n}")
        check_against(self.phi, self.table)


@dataclass
class SynthesisResult:
    status: str
    inputs: Optional[np.ndarray] = None  # (H, m)
    trajectory: Optional[StateSignal] = None
    objective_value: Optional[int] = None
    solve_seconds: float = 0.0
    message: str = ""


@dataclass
class BuiltModel:
    model: Model
    ctx: EncodingContext
    x: list[list[int]] = field(default_factory=list)
    u: list[list[int]] = field(default_factory=list)
    objective_var: int = -1


def build(problem: SynthesisProblem) -> BuiltModel:
    """Assemble the MILP: dynamics, boxes, satisfaction at 0, maximized robustness ``J``."""
    sys_, H = problem.system, problem.H
    model = Model(bigM_time=time_big_m(H), epsilon=problem.epsilon)
    x = []
    for t in range(H + 1):
        row = []
        for d in range(sys_.n):
            if t == 0:
                lo = hi = sys_.x0[d]
            else:
                lo, hi = sys_.state_box[d]
            row.append(model.add_var(VarKind.CONTINUOUS, lo, hi, f"x_{d + 1}_{t}"))
        x.append(row)
    u = [
        [model.add_var(VarKind.CONTINUOUS, -sys_.input_bound, sys_.input_bound, f"u_{j + 1}_{t}") for j in range(sys_.m)]
        for t in range(H)
    ]
    for t in range(H):
        for d in range(sys_.n):
            expr = var(x[t + 1][d])
            for k in range(sys_.n):
                if sys_.A[d, k] != 0.0:
                    expr = expr - sys_.A[d, k] * var(x[t][k])
            for j in range(sys_.m):
                if sys_.B[d, j] != 0.0:
                    expr = expr - sys_.B[d, j] * var(u[t][j])
            model.add_constraint(expr, "=", 0, name=f"dyn_{d + 1}_{t}")
    ctx = EncodingContext(model, problem.table, H, state_vars=x)
    sat = encode_formula_bool(ctx, problem.phi, 0)
    model.add_constraint(var(sat), "=", 1, name="spec_holds")
    th = encode_formula_theta(ctx, problem.phi, 0, problem.objective)
    J = model.add_var(VarKind.CONTINUOUS, -math.inf, math.inf, "J")
    model.add_constraint(var(J) - var(th), "=", 0, name="objective_def")
    model.set_objective(var(J), maximize=True)
    return BuiltModel(model, ctx, x, u, J)


def solve(problem: SynthesisProblem, config: Optional[backend_mod.SolverConfig] = None, lp_path: Optional[str] = None) -> SynthesisResult:
    """Build, export and solve; infeasibility is reported through ``status``."""
    config = config or backend_mod.SolverConfig.from_env()
    built = build(problem)
    lp = export_lp(built.model)
    if lp_path:
        with open(lp_path, "w") as fh:
            fh.write(lp)
    start = time.perf_counter()
    sol = backend_mod.run(config, lp)
    elapsed = time.perf_counter() - start
    if not sol.has_values:
        return SynthesisResult(sol.status, solve_seconds=elapsed, message=sol.message)
    sol = backend_mod.round_integers(sol, built.model)
    values = sol.values
    xs = np.array([[values.get(built.model[v].name, 0.0) for v in row] for row in built.x])
    us = np.array([[values.get(built.model[v].name, 0.0) for v in row] for row in built.u]).reshape(problem.H, problem.system.m)
    objective = sol.objective
    if objective is None:
        objective = values.get("J", 0.0)
    return SynthesisResult(
        status=sol.status,
        inputs=us,
        trajectory=StateSignal(xs),
        objective_value=int(round(objective)),
        solve_seconds=elapsed,
        message=sol.message,
    )


def validate(result: SynthesisResult, problem: SynthesisProblem, tol: Optional[float] = None) -> dict:
    """Re-evaluate the returned trajectory with the exact semantics.

    ``tol`` (default ``epsilon / 2``) absorbs solver round-off at predicate
    boundaries; the encoding keeps violated predicates at ``mu <= -epsilon``.
    """
    if result.trajectory is None:
        raise ValueError(f"result with status {result.status!r} has no trajectory")
    tol = problem.epsilon / 2 if tol is None else tol
    sigs = booleanize(result.trajectory, problem.table, tol=tol)
    cross = tuple(robustness(problem.phi, sigs, 0, k) for k in KINDS)
    selected = cross[KINDS.index(problem.objective)]
    dyn_err = 0.0
    if result.inputs is not None:
        sim = problem.system.simulate(result.inputs)
        dyn_err = float(np.max(np.abs(sim - result.trajectory.states)))
    return {
        "objective_consistent": result.objective_value is not None and selected == result.objective_value,
        "char_holds": char(problem.phi, sigs, 0) == 1,
        "cross_eval": cross,
        "dynamics_error": dyn_err,
    }


# -- scenario and result files -----------------------------------------------

def load_scenario(source) -> tuple[SynthesisProblem, dict]:
    """Read a scenario JSON (path or parsed dict); returns the problem and the raw mapping."""
    if isinstance(source, dict):
        cfg = source
    else:
        with open(source) as fh:
            cfg = json.load(fh)
    s = cfg["system"]
    system = LinearSystem(
        A=s["A"], B=s["B"], state_box=s["state_box"], input_bound=float(s["input_bound"]), x0=s["x0"]
    )
    table = PredicateTable.from_specs(cfg["predicates"])
    phi = parse(cfg["formula"], table)
    problem = SynthesisProblem(system, phi, table, int(cfg["horizon"]), cfg.get("objective", "theta"))
    return problem, cfg


def bundled_scenarios() -> list[str]:
    return sorted(p.name[:-5] for p in resources.files("trk.scenarios").iterdir() if p.name.endswith(".json"))


def resolve_scenario(name_or_path: str) -> str:
    """Path of a scenario file, accepting bundled names such as ``scenario1_theta``."""
    if os.path.exists(name_or_path):
        return name_or_path
    stem = os.path.basename(name_or_path)
    stem = stem[:-5] if stem.endswith(".json") else stem
    candidate = resources.files("trk.scenarios") / f"{stem}.json"
    if candidate.is_file():
        return str(candidate)
    raise FileNotFoundError(f"no scenario file {name_or_path!r} (bundled: {', '.join(bundled_scenarios())})")


def write_result(out_dir: str, cfg: dict, problem: SynthesisProblem, result: SynthesisResult, report: Optional[dict]) -> None:
    """Write ``trajectory.csv``, ``summary.json``, ``plot_data.csv`` and a copy of the scenario."""
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "scenario.json"), "w") as fh:
        json.dump(cfg, fh, indent=2)
    summary = {
        "objective": result.objective_value,
        "objective_kind": problem.objective,
        "cross_eval": None,
        "solver_status": result.status,
        "solve_seconds": round(result.solve_seconds, 3),
        "formula": to_string(problem.phi),
        "horizon": problem.H,
    }
    if report is not None:
        summary["cross_eval"] = dict(zip(KINDS, report["cross_eval"]))
        summary["objective_consistent"] = report["objective_consistent"]
        summary["char_holds"] = report["char_holds"]
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2)
    if result.trajectory is None:
        return
    n, m = problem.system.n, problem.system.m
    xs = result.trajectory.states
    with open(os.path.join(out_dir, "trajectory.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"x{d + 1}" for d in range(n)] + [f"u{j + 1}" for j in range(m)])
        for t in range(problem.H + 1):
            u = result.inputs[t] if t < problem.H else [""] * m
            w.writerow([t] + [repr(float(v)) for v in xs[t]] + [v if v == "" else repr(float(v)) for v in u])
    sigs = booleanize(result.trajectory, problem.table, tol=problem.epsilon / 2)
    with open(os.path.join(out_dir, "plot_data.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + problem.table.names)
        for t in range(problem.H + 1):
            w.writerow([t] + [int(sigs.chi[k, t]) for k in range(problem.table.K)])


def read_trajectory(path: str, n: int) -> tuple[StateSignal, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    xs = np.array([[float(r[f"x{d + 1}"]) for d in range(n)] for r in rows])
    ucols = [c for c in rows[0] if c.startswith("u")] if rows else []
    us = np.array([[float(r[c]) for c in ucols] for r in rows[:-1]]) if ucols else np.zeros((len(rows) - 1, 0))
    return StateSignal(xs), us
