"""Run an external LP-file MILP solver in a subprocess and read back its solution.

The solver is described by a command template with ``{model}`` and
``{solution}`` placeholders (optionally ``{time_limit}`` and ``{mip_gap}``).
Examples::

    python3 -m trk.highs_runner {model} {solution} --time-limit {time_limit} --mip-gap {mip_gap}
    cbc {model} sec {time_limit} ratio {mip_gap} solve solu {solution}
    gurobi_cl MIPGap={mip_gap} TimeLimit={time_limit} ResultFile={solution} {model}
"""

from __future__ import annotations

import logging
import os
import shlex
import shutil
import subprocess
import sys
import tempfile
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field, replace
from typing import Optional

from .milp import Model, VarKind

log = logging.getLogger(__name__)

ENV_VAR = "TRK_SOLVER_CMD"
DEFAULT_COMMAND = (
    f"{shlex.quote(sys.executable)} -m trk.highs_runner {{model}} {{solution}}"
    " --time-limit {time_limit} --mip-gap {mip_gap}"
)
STATUSES = ("optimal", "feasible", "infeasible", "timeout", "error")


class SolverError(RuntimeError):
    """The solver process could not be started."""


class IntegralityError(ValueError):
    pass


@dataclass
class SolverConfig:
    command_template: str = DEFAULT_COMMAND
    time_limit_seconds: float = 1800.0
    mip_gap: float = 0.0
    work_dir: Optional[str] = None
    keep_files: bool = False

    def __post_init__(self):
        for ph in ("{model}", "{solution}"):
            if ph not in self.command_template:
                raise ValueError(f"solver command template must contain {ph}")
        if self.time_limit_seconds <= 0:
            raise ValueError("time limit must be positive")
        if self.mip_gap < 0:
            raise ValueError("mip gap must be nonnegative")

    @classmethod
    def from_env(cls, command: Optional[str] = None, **kwargs) -> "SolverConfig":
        """Command from the argument, else ``$TRK_SOLVER_CMD``, else the bundled HiGHS runner."""
        return cls(command or os.environ.get(ENV_VAR) or DEFAULT_COMMAND, **kwargs)


@dataclass
class Solution:
    status: str
    objective: Optional[float] = None
    values: dict[str, float] = field(default_factory=dict)
    message: str = ""

    def __post_init__(self):
        if self.status not in STATUSES:
            raise ValueError(f"unknown status {self.status!r}")
        if self.status not in ("optimal", "feasible"):
            self.values = {}

    @property
    def has_values(self) -> bool:
        return self.status in ("optimal", "feasible")


# -- solution file parsing ---------------------------------------------------

def _parse_highs(lines: list[str]) -> Solution:
    model_status = lines[1].strip() if len(lines) > 1 else ""
    values: dict[str, float] = {}
    objective = None
    primal = "None"
    i = 2
    while i < len(lines):
        line = lines[i].strip()
        if line == "# Primal solution values" and i + 1 < len(lines):
            primal = lines[i + 1].strip()
            i += 2
            continue
        if line.startswith("Objective "):
            objective = float(line.split()[1])
        elif line.startswith("# Columns "):
            n = int(line.split()[2])
            for row in lines[i + 1 : i + 1 + n]:
                name, val = row.split()[:2]
                values[name] = float(val)
            i += n
        elif line.startswith("# Rows") or line.startswith("# Dual"):
            break
        i += 1
    low = model_status.lower()
    has = primal == "Feasible" and bool(values)
    if low == "optimal":
        status = "optimal"
    elif "infeasible" in low:
        status = "infeasible"
    elif "time limit" in low:
        status = "feasible" if has else "timeout"
    elif has and low not in ("unbounded",):
        status = "feasible"
    else:
        status = "error"
    return Solution(status, objective, values, message=model_status)


def _parse_cbc(lines: list[str]) -> Solution:
    header = lines[0].strip()
    low = header.lower()
    objective = None
    if "objective value" in low:
        try:
            objective = float(header.rsplit(None, 1)[-1])
        except ValueError:
            objective = None
    values = {}
    for row in lines[1:]:
        parts = row.replace("**", " ").split()
        if len(parts) >= 3:
            values[parts[1]] = float(parts[2])
    if low.startswith("optimal"):
        status = "optimal"
    elif "infeasible" in low:
        status = "infeasible"
    elif low.startswith("stopped"):
        status = "feasible" if values and objective is not None and "no solution" not in low else "timeout"
        if "time" not in low and status == "timeout":
            status = "error"
    else:
        status = "error"
    return Solution(status, objective, values, message=header)


def _parse_cplex_xml(text: str) -> Solution:
    root = ET.fromstring(text)
    head = root.find("header")
    desc = (head.get("solutionStatusString", "") if head is not None else "").lower()
    objective = float(head.get("objectiveValue")) if head is not None and head.get("objectiveValue") else None
    values = {v.get("name"): float(v.get("value")) for v in root.iter("variable")}
    if "infeasible" in desc:
        status = "infeasible"
    elif "optimal" in desc:
        status = "optimal"
    elif "time limit" in desc:
        status = "feasible" if values else "timeout"
    elif values:
        status = "feasible"
    else:
        status = "error"
    return Solution(status, objective, values, message=desc)


def _parse_plain(lines: list[str]) -> Solution:
    objective = None
    header = []
    values = {}
    for raw in lines:
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            header.append(line.lower())
            if "objective value" in line.lower():
                objective = float(line.split("=")[-1])
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"cannot read solution line {line!r}")
        values[parts[0]] = float(parts[1])
    if not values:
        return Solution("error", message="solution file has no values")
    status = "optimal" if any("optimal" in h for h in header) else "feasible"
    return Solution(status, objective, values, message=" ".join(header))


def parse_solution(text: str) -> Solution:
    """Auto-detect HiGHS, CBC, CPLEX XML or plain ``name value`` solution files."""
    stripped = text.strip()
    if not stripped:
        return Solution("error", message="empty solution file")
    lines = stripped.splitlines()
    first = lines[0].strip().lower()
    try:
        if stripped.startswith("<"):
            return _parse_cplex_xml(stripped)
        if first == "model status":
            return _parse_highs(lines)
        if " - objective value" in first or first.startswith(("optimal", "infeasible", "stopped", "unbounded", "integer infeasible")):
            return _parse_cbc(lines)
        return _parse_plain(lines)
    except (ValueError, IndexError, ET.ParseError) as exc:
        return Solution("error", message=f"unparsable solution file: {exc}")


# -- running -----------------------------------------------------------------

def _excerpt(text: str, limit: int = 2000) -> str:
    return text if len(text) <= limit else "..." + text[-limit:]


def run(config: SolverConfig, lp_text: str) -> Solution:
    """Solve ``lp_text`` with the configured solver.

    Infeasibility and timeouts come back as statuses; only a solver that
    cannot be started raises :class:`SolverError`.
    """
    tmp = tempfile.mkdtemp(prefix="trk-", dir=config.work_dir)
    model_path = os.path.join(tmp, "model.lp")
    sol_path = os.path.join(tmp, "model.sol")
    try:
        with open(model_path, "w") as fh:
            fh.write(lp_text)
        cmd = config.command_template.format(
            model=shlex.quote(model_path),
            solution=shlex.quote(sol_path),
            time_limit=f"{config.time_limit_seconds:g}",
            mip_gap=f"{config.mip_gap:g}",
        )
        args = shlex.split(cmd)
        log.debug("running solver: %s", cmd)
        try:
            proc = subprocess.run(
                args, capture_output=True, text=True, timeout=config.time_limit_seconds * 1.5 + 60
            )
        except FileNotFoundError as exc:
            raise SolverError(f"cannot start solver {args[0]!r}: {exc}") from exc
        except subprocess.TimeoutExpired:
            return Solution("timeout", message="solver process exceeded the time limit")
        output = (proc.stdout or "") + (proc.stderr or "")
        if not os.path.exists(sol_path) or os.path.getsize(sol_path) == 0:
            low = output.lower()
            if "infeasible" in low and proc.returncode == 0:
                return Solution("infeasible", message=_excerpt(output))
            return Solution("error", message=f"exit code {proc.returncode}, no solution file\n{_excerpt(output)}")
        with open(sol_path) as fh:
            sol = parse_solution(fh.read())
        if sol.status == "error":
            sol.message = f"{sol.message}\n{_excerpt(output)}"
        return sol
    finally:
        if config.keep_files:
            log.info("solver files kept in %s", tmp)
        else:
            shutil.rmtree(tmp, ignore_errors=True)


def round_integers(solution: Solution, model: Model, tol: float = 1e-4) -> Solution:
    """Snap integer and binary variables to the nearest integer."""
    if not solution.has_values:
        raise ValueError(f"cannot round a solution with status {solution.status!r}")
    values = dict(solution.values)
    for v in model.variables:
        if v.kind is VarKind.CONTINUOUS:
            continue
        x = values.get(v.name, 0.0)
        r = round(x)
        if abs(x - r) > tol:
            raise IntegralityError(f"{v.name} = {x} is not integral within {tol}")
        values[v.name] = float(r)
    return replace(solution, values=values)


def solution_vector(solution: Solution, model: Model) -> list[float]:
    """Values in model variable order; variables omitted by the solver read as 0."""
    return [solution.values.get(v.name, 0.0) for v in model.variables]
