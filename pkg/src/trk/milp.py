"""Solver-agnostic MILP builder, big-M gadgets and CPLEX LP export."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Sequence, Union

VarId = int


class VarKind(str, Enum):
    CONTINUOUS = "continuous"
    BINARY = "binary"
    INTEGER = "integer"


@dataclass(frozen=True)
class Variable:
    name: str
    kind: VarKind
    lower: float
    upper: float


class LinearExpr:
    """Sparse ``sum(coef * var) + constant``; combining expressions merges duplicate ids."""

    __slots__ = ("terms", "constant")

    def __init__(self, terms: Mapping[VarId, float] | Iterable[tuple[VarId, float]] = (), constant: float = 0.0):
        merged: dict[VarId, float] = {}
        items = terms.items() if isinstance(terms, Mapping) else terms
        for v, c in items:
            merged[v] = merged.get(v, 0.0) + float(c)
        self.terms = merged
        self.constant = float(constant)

    @classmethod
    def of(cls, x: "ExprLike") -> "LinearExpr":
        if isinstance(x, LinearExpr):
            return x
        if isinstance(x, (int, float)) and not isinstance(x, bool):
            return cls((), x)
        raise TypeError(f"cannot convert {x!r} to a linear expression; wrap variable ids with var()")

    def __add__(self, other: "ExprLike") -> "LinearExpr":
        other = LinearExpr.of(other)
        return LinearExpr(list(self.terms.items()) + list(other.terms.items()), self.constant + other.constant)

    __radd__ = __add__

    def __neg__(self) -> "LinearExpr":
        return self * -1.0

    def __sub__(self, other: "ExprLike") -> "LinearExpr":
        return self + (-LinearExpr.of(other))

    def __rsub__(self, other: "ExprLike") -> "LinearExpr":
        return LinearExpr.of(other) - self

    def __mul__(self, k: float) -> "LinearExpr":
        return LinearExpr({v: c * k for v, c in self.terms.items()}, self.constant * k)

    __rmul__ = __mul__

    def normalized(self) -> "LinearExpr":
        return LinearExpr({v: c for v, c in self.terms.items() if c != 0.0}, self.constant)

    def value(self, values: Sequence[float] | Mapping[VarId, float]) -> float:
        return self.constant + sum(c * values[v] for v, c in self.terms.items())

    def __repr__(self) -> str:
        return f"LinearExpr({self.terms!r}, {self.constant!r})"


ExprLike = Union[LinearExpr, int, float]


def var(v: VarId, coef: float = 1.0) -> LinearExpr:
    return LinearExpr({v: coef})


@dataclass
class Constraint:
    expr: LinearExpr
    sense: str  # "<=", "=", ">="
    rhs: float
    name: str


_NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_.\[\]]*$")


class Model:
    """Mutable single-owner MILP builder.

    ``bigM_time`` bounds the spread of any two time-robustness quantities
    and is used by every min/max gadget; ``epsilon`` is the margin that
    separates ``mu < 0`` from ``mu >= 0`` in predicate encodings.
    """

    def __init__(self, bigM_time: float = 100.0, bigM_space: float = 1e3, epsilon: float = 1e-6):
        if epsilon <= 0:
            raise ValueError("epsilon must be positive")
        self.variables: list[Variable] = []
        self.constraints: list[Constraint] = []
        self.objective = LinearExpr()
        self.maximize = True
        self.bigM_time = float(bigM_time)
        self.bigM_space = float(bigM_space)
        self.epsilon = float(epsilon)
        self._index: dict[str, VarId] = {}
        self._counter = 0

    # -- variables ---------------------------------------------------------
    def add_var(self, kind: VarKind | str, lower: float = -math.inf, upper: float = math.inf, name: str | None = None) -> VarId:
        kind = VarKind(kind)
        if kind is VarKind.BINARY:
            lower, upper = max(0.0, lower), min(1.0, upper)
        if lower > upper:
            raise ValueError(f"variable {name!r} has lower bound {lower} above upper bound {upper}")
        if name is None:
            name = self.fresh_name("v")
        if not _NAME_RE.match(name):
            raise ValueError(f"variable name {name!r} is not LP-safe")
        if name in self._index:
            raise ValueError(f"duplicate variable name {name!r}")
        vid = len(self.variables)
        self.variables.append(Variable(name, kind, float(lower), float(upper)))
        self._index[name] = vid
        return vid

    def fresh_name(self, prefix: str) -> str:
        while True:
            name = f"{prefix}_{self._counter}"
            self._counter += 1
            if name not in self._index:
                return name

    def var_id(self, name: str) -> VarId:
        return self._index[name]

    def has_var(self, name: str) -> bool:
        return name in self._index

    def __getitem__(self, vid: VarId) -> Variable:
        return self.variables[vid]

    def fix(self, vid: VarId, value: float) -> None:
        v = self.variables[vid]
        self.variables[vid] = Variable(v.name, v.kind, float(value), float(value))

    def bounds(self, x: ExprLike) -> tuple[float, float]:
        """Interval bounds of an expression from its variables' boxes."""
        e = LinearExpr.of(x)
        lo = hi = e.constant
        for v, c in e.terms.items():
            var_ = self.variables[v]
            a, b = c * var_.lower, c * var_.upper
            if c < 0:
                a, b = b, a
            lo += a if c != 0 else 0.0
            hi += b if c != 0 else 0.0
        return lo, hi

    # -- constraints -------------------------------------------------------
    def add_constraint(self, expr: ExprLike, sense: str, rhs: ExprLike = 0.0, name: str | None = None) -> Constraint:
        if sense not in ("<=", "=", ">="):
            raise ValueError(f"unknown sense {sense!r}")
        e = LinearExpr.of(expr) - LinearExpr.of(rhs)
        e = e.normalized()
        const = e.constant
        e = LinearExpr(e.terms)
        if not all(math.isfinite(c) for c in e.terms.values()) or not math.isfinite(const):
            raise ValueError("constraint coefficients must be finite")
        con = Constraint(e, sense, -const, name or f"c{len(self.constraints)}")
        self.constraints.append(con)
        return con

    def set_objective(self, expr: ExprLike, maximize: bool = True) -> None:
        e = LinearExpr.of(expr)
        for v in e.terms:
            if not 0 <= v < len(self.variables):
                raise ValueError(f"objective references unknown variable id {v}")
        self.objective = e
        self.maximize = maximize

    @property
    def integer_ids(self) -> list[VarId]:
        return [i for i, v in enumerate(self.variables) if v.kind is not VarKind.CONTINUOUS]

    def check(self, values: Sequence[float], tol: float = 1e-9) -> bool:
        """Whether a full assignment satisfies bounds, integrality and every row."""
        for v, x in zip(self.variables, values):
            if x < v.lower - tol or x > v.upper + tol:
                return False
            if v.kind is not VarKind.CONTINUOUS and abs(x - round(x)) > tol:
                return False
        for c in self.constraints:
            lhs = c.expr.value(values)
            if c.sense == "<=" and lhs > c.rhs + tol:
                return False
            if c.sense == ">=" and lhs < c.rhs - tol:
                return False
            if c.sense == "=" and abs(lhs - c.rhs) > tol:
                return False
        return True


# -- gadgets -----------------------------------------------------------------

def _minmax(model: Model, inputs: Sequence[ExprLike], name: str | None, big_m: float | None, is_min: bool) -> VarId:
    if not inputs:
        raise ValueError("min/max gadget needs at least one input")
    exprs = [LinearExpr.of(x) for x in inputs]
    bnds = [model.bounds(e) for e in exprs]
    lo = min(b[0] for b in bnds) if is_min else max(b[0] for b in bnds)
    hi = min(b[1] for b in bnds) if is_min else max(b[1] for b in bnds)
    all_int = all(
        e.constant == int(e.constant)
        and all(c == int(c) and model[v].kind is not VarKind.CONTINUOUS for v, c in e.terms.items())
        for e in exprs
    )
    kind = VarKind.INTEGER if all_int else VarKind.CONTINUOUS
    tag = "min" if is_min else "max"
    r = model.add_var(kind, lo, hi, name or model.fresh_name(tag))
    rname = model[r].name
    if len(exprs) == 1:
        model.add_constraint(var(r), "=", exprs[0], name=f"{rname}_eq")
        return r
    M = model.bigM_time if big_m is None else float(big_m)
    spread = max(b[1] for b in bnds) - min(b[0] for b in bnds)
    if M < spread:
        raise ValueError(f"big-M {M} is smaller than the input spread {spread}")
    bs = []
    for i, e in enumerate(exprs):
        b = model.add_var(VarKind.BINARY, name=f"{rname}_b{i}")
        bs.append(b)
        if is_min:
            # r <= r_i ; r >= r_i - M (1 - b_i)
            model.add_constraint(var(r), "<=", e, name=f"{rname}_ub{i}")
            model.add_constraint(var(r) - e - M * var(b), ">=", -M, name=f"{rname}_lb{i}")
        else:
            # r >= r_i ; r <= r_i + M (1 - b_i)
            model.add_constraint(var(r), ">=", e, name=f"{rname}_lb{i}")
            model.add_constraint(var(r) - e + M * var(b), "<=", M, name=f"{rname}_ub{i}")
    model.add_constraint(LinearExpr({b: 1.0 for b in bs}), "=", 1, name=f"{rname}_sel")
    return r


def encode_min(model: Model, inputs: Sequence[ExprLike], name: str | None = None, big_m: float | None = None) -> VarId:
    """Fresh variable equal to ``min(inputs)`` in every feasible point."""
    return _minmax(model, inputs, name, big_m, is_min=True)


def encode_max(model: Model, inputs: Sequence[ExprLike], name: str | None = None, big_m: float | None = None) -> VarId:
    """Fresh variable equal to ``max(inputs)`` in every feasible point."""
    return _minmax(model, inputs, name, big_m, is_min=False)


def encode_binary_product(
    model: Model,
    z: VarId,
    y: ExprLike,
    lo: float | None = None,
    hi: float | None = None,
    name: str | None = None,
    kind: VarKind | str | None = None,
) -> VarId:
    """Fresh variable ``w = z * y`` for binary ``z`` and bounded ``y`` in ``[lo, hi]``.

    Bounds default to the interval bounds of ``y``.
    """
    if model[z].kind is not VarKind.BINARY:
        raise ValueError(f"{model[z].name} is not binary")
    ye = LinearExpr.of(y)
    blo, bhi = model.bounds(ye)
    lo = blo if lo is None else lo
    hi = bhi if hi is None else hi
    if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
        raise ValueError(f"product needs finite bounds on y, got [{lo}, {hi}]")
    if kind is None:
        integral = all(c == int(c) and model[v].kind is not VarKind.CONTINUOUS for v, c in ye.terms.items())
        kind = VarKind.INTEGER if integral and ye.constant == int(ye.constant) else VarKind.CONTINUOUS
    w = model.add_var(kind, min(0.0, lo), max(0.0, hi), name or model.fresh_name("prod"))
    wn = model[w].name
    zw = var(z)
    model.add_constraint(var(w) - hi * zw, "<=", 0, name=f"{wn}_p0")
    model.add_constraint(var(w) - lo * zw, ">=", 0, name=f"{wn}_p1")
    # w <= y - lo (1 - z) ; w >= y - hi (1 - z)
    model.add_constraint(var(w) - ye - lo * zw, "<=", -lo, name=f"{wn}_p2")
    model.add_constraint(var(w) - ye - hi * zw, ">=", -hi, name=f"{wn}_p3")
    return w


# -- LP export ---------------------------------------------------------------

def _num(x: float) -> str:
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(float(x))


def _expr_text(model: Model, e: LinearExpr) -> str:
    parts = []
    for v, c in e.terms.items():
        if c == 0.0:
            continue
        name = model[v].name
        mag = abs(c)
        coef = "" if mag == 1.0 else f"{_num(mag)} "
        sign = "-" if c < 0 else "+"
        if not parts:
            parts.append(f"{'- ' if c < 0 else ''}{coef}{name}")
        else:
            parts.append(f"{sign} {coef}{name}")
    return " ".join(parts)


def _wrap_lines(text: str, width: int = 240) -> str:
    # LP readers cap line length; break before a sign so terms stay whole.
    if len(text) <= width:
        return text
    terms = re.split(r" (?=[+-] )", text)
    out, line = [], terms[0]
    for term in terms[1:]:
        if len(line) + 1 + len(term) > width:
            out.append(line)
            line = "   " + term
        else:
            line = f"{line} {term}"
    out.append(line)
    return "\n".join(out)


def export_lp(model: Model) -> str:
    """CPLEX LP text, deterministic in insertion order."""
    lines = ["Maximize" if model.maximize else "Minimize"]
    obj = _expr_text(model, model.objective)
    const = model.objective.constant
    if not obj:
        obj = _num(const)
    elif const:
        obj += f" {'+' if const > 0 else '-'} {_num(abs(const))}"
    lines.append(_wrap_lines(f" obj: {obj}"))
    lines.append("Subject To")
    for c in model.constraints:
        body = _expr_text(model, c.expr)
        if not body:
            # constant row; kept so that an infeasible constant is not silently dropped
            body = f"0 {model[0].name}" if model.variables else "0"
        lines.append(_wrap_lines(f" {c.name}: {body} {c.sense} {_num(c.rhs)}"))
    bounds = []
    for v in model.variables:
        if v.kind is VarKind.BINARY:
            if v.lower == v.upper:
                bounds.append(f" {v.name} = {_num(v.lower)}")
            continue
        lo, hi = v.lower, v.upper
        if lo == hi:
            bounds.append(f" {v.name} = {_num(lo)}")
        elif lo == -math.inf and hi == math.inf:
            bounds.append(f" {v.name} free")
        elif lo == -math.inf:
            bounds.append(f" -inf <= {v.name} <= {_num(hi)}")
        elif hi == math.inf:
            if lo != 0.0:
                bounds.append(f" {v.name} >= {_num(lo)}")
        else:
            bounds.append(f" {_num(lo)} <= {v.name} <= {_num(hi)}")
    if bounds:
        lines.append("Bounds")
        lines.extend(bounds)
    generals = [v.name for v in model.variables if v.kind is VarKind.INTEGER]
    binaries = [v.name for v in model.variables if v.kind is VarKind.BINARY]
    if generals:
        lines.append("Generals")
        lines.extend(f" {n}" for n in generals)
    if binaries:
        lines.append("Binaries")
        lines.extend(f" {n}" for n in binaries)
    lines.append("End")
    return "\n".join(lines) + "\n"
