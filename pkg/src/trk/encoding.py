"""MILP encoding of Boolean satisfaction and time robustness of STL formulas.

Predicate truth is a binary ``z`` per time step. Run-length counters turn
``z`` into left/right robustness, and the combined robustness of a
predicate picks ``min`` of the two when satisfied and ``max`` otherwise:
``theta = z * min(l, r) + (1 - z) * max(l, r)``. Operators above the
predicates are min/max gadgets over child variables.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from .milp import LinearExpr, Model, VarId, VarKind, encode_binary_product, encode_max, encode_min, var
from .semantics import HorizonError, Kind, KINDS, PredicateSignalSet
from .stl import (
    Always,
    And,
    Eventually,
    Formula,
    Not,
    Or,
    Pred,
    PredicateTable,
    Until,
    formula_length,
)

_PREFIX = {"theta": "th", "theta_left": "thl", "theta_right": "thr"}


@dataclass
class Counters:
    c1: list[VarId]  # satisfied run length starting at t, looking forward
    c0: list[VarId]  # violated run length starting at t, looking forward
    d1: list[VarId]  # satisfied run length ending at t, looking back
    d0: list[VarId]  # violated run length ending at t, looking back


class EncodingContext:
    """Shared state while encoding formulas into one model.

    Either ``state_vars`` (``state_vars[t][d]``) is given and predicate
    binaries are tied to the state through big-M rows, or the context is
    built with :meth:`pinned`, where every ``z`` is fixed to a known
    truth value.
    """

    def __init__(self, model: Model, table: PredicateTable, H: int, state_vars: Optional[Sequence[Sequence[VarId]]] = None):
        self.model = model
        self.table = table
        self.H = H
        self.state_vars = state_vars
        self.cap = H + 1
        self.cache: dict[tuple[str, Formula, int], VarId] = {}
        self._z: dict[tuple[int, int], VarId] = {}
        self._nz: dict[tuple[int, int], VarId] = {}
        self._counters: dict[int, Counters] = {}
        self._node_names: dict[Formula, str] = {}

    @classmethod
    def pinned(cls, model: Model, table: PredicateTable, sigs: PredicateSignalSet) -> "EncodingContext":
        ctx = cls(model, table, sigs.H)
        for p in table:
            for t in range(sigs.H + 1):
                v = 1.0 if sigs.row(p.id)[t] > 0 else 0.0
                ctx._z[p.id, t] = model.add_var(VarKind.BINARY, v, v, f"z_{p.label}_{t}")
        return ctx

    def node_name(self, phi: Formula) -> str:
        if isinstance(phi, Pred):
            return phi.name
        if phi not in self._node_names:
            self._node_names[phi] = f"n{len(self._node_names)}"
        return self._node_names[phi]

    def rob_var(self, lo: float | None = None, hi: float | None = None, name: str | None = None) -> VarId:
        lo = -self.cap if lo is None else lo
        hi = self.cap if hi is None else hi
        return self.model.add_var(VarKind.INTEGER, lo, hi, name)


# -- predicates --------------------------------------------------------------

def encode_predicate_bool(ctx: EncodingContext, pid: int, t: int) -> VarId:
    """Binary ``z`` with ``z = 1`` iff ``mu(x_t) >= 0`` (violation means ``mu <= -epsilon``)."""
    if not 0 <= t <= ctx.H:
        raise HorizonError(f"time {t} outside 0..{ctx.H}")
    key = (pid, t)
    if key in ctx._z:
        return ctx._z[key]
    if ctx.state_vars is None:
        raise ValueError("context has neither state variables nor a pinned value for this predicate")
    m = ctx.model
    p = ctx.table[pid]
    mu = LinearExpr(zip(ctx.state_vars[t], p.coeffs), p.offset).normalized()
    lo, hi = m.bounds(mu)
    M = max(abs(lo), abs(hi)) + 1.0
    eps = m.epsilon
    z = m.add_var(VarKind.BINARY, name=f"z_{p.label}_{t}")
    # mu <= M z - eps (1 - z)
    m.add_constraint(mu - (M + eps) * var(z), "<=", -eps, name=f"mu_{p.label}_{t}_hi")
    # mu >= -M (1 - z)
    m.add_constraint(mu - M * var(z), ">=", -M, name=f"mu_{p.label}_{t}_lo")
    ctx._z[key] = z
    return z


def _not_z(ctx: EncodingContext, pid: int, t: int) -> VarId:
    key = (pid, t)
    if key not in ctx._nz:
        z = encode_predicate_bool(ctx, pid, t)
        name = ctx.table[pid].label
        nz = ctx.model.add_var(VarKind.BINARY, name=f"nz_{name}_{t}")
        ctx.model.add_constraint(var(nz) + var(z), "=", 1, name=f"nz_{name}_{t}_link")
        ctx._nz[key] = nz
    return ctx._nz[key]


def encode_counters(ctx: EncodingContext, pid: int) -> Counters:
    """Run-length counters for predicate ``pid`` over the whole horizon.

    Forward: ``c1_t = z_t (1 + c1_{t+1})``, ``c0_t = (1 - z_t)(1 + c0_{t+1})``
    with zero past ``H``. Backward counters ``d1``/``d0`` mirror this from 0.
    """
    if pid in ctx._counters:
        return ctx._counters[pid]
    m = ctx.model
    H = ctx.H
    name = ctx.table[pid].label
    z = [encode_predicate_bool(ctx, pid, t) for t in range(H + 1)]
    nz = [_not_z(ctx, pid, t) for t in range(H + 1)]

    def chain(bits: list[VarId], order: Sequence[int], prefix: str) -> list[VarId]:
        out: dict[int, VarId] = {}
        prev = None
        for n, t in enumerate(order):
            if prev is None:
                w = m.add_var(VarKind.INTEGER, 0, 1, f"{prefix}_{name}_{t}")
                m.add_constraint(var(w) - var(bits[t]), "=", 0, name=f"{prefix}_{name}_{t}_eq")
            else:
                # run of length n + 1 at most
                w = encode_binary_product(
                    m, bits[t], var(prev) + 1, lo=1, hi=n + 1, name=f"{prefix}_{name}_{t}", kind=VarKind.INTEGER
                )
            out[t] = w
            prev = w
        return [out[t] for t in range(H + 1)]

    backward_order = list(range(H, -1, -1))
    forward_order = list(range(H + 1))
    counters = Counters(
        c1=chain(z, backward_order, "c1"),
        c0=chain(nz, backward_order, "c0"),
        d1=chain(z, forward_order, "d1"),
        d0=chain(nz, forward_order, "d0"),
    )
    ctx._counters[pid] = counters
    return counters


def encode_theta_directional(ctx: EncodingContext, pid: int, t: int, direction: str) -> VarId:
    """Left (``"left"``, looking forward) or right (``"right"``, looking back) robustness of a predicate.

    ``theta = c1 - c0 - (2 z - 1)``: a run of ``L`` equal values counts ``L - 1`` steps.
    """
    if direction not in ("left", "right"):
        raise ValueError(f"direction must be 'left' or 'right', not {direction!r}")
    kind = "theta_left" if direction == "left" else "theta_right"
    pred = Pred(pid, ctx.table[pid].label)
    key = (kind, pred, t)
    if key in ctx.cache:
        return ctx.cache[key]
    cnt = encode_counters(ctx, pid)
    one, zero = (cnt.c1, cnt.c0) if direction == "left" else (cnt.d1, cnt.d0)
    z = encode_predicate_bool(ctx, pid, t)
    th = ctx.rob_var(-ctx.H, ctx.H, f"{_PREFIX[kind]}_{pred.name}_{t}")
    ctx.model.add_constraint(var(th) - var(one[t]) + var(zero[t]) + 2 * var(z), "=", 1, name=f"{_PREFIX[kind]}_{pred.name}_{t}_def")
    ctx.cache[key] = th
    return th


def encode_theta_pred(ctx: EncodingContext, pid: int, t: int) -> VarId:
    """Combined robustness of a predicate: ``z * min(l, r) + (1 - z) * max(l, r)``."""
    pred = Pred(pid, ctx.table[pid].label)
    key = ("theta", pred, t)
    if key in ctx.cache:
        return ctx.cache[key]
    m = ctx.model
    name = pred.name
    left = encode_theta_directional(ctx, pid, t, "left")
    right = encode_theta_directional(ctx, pid, t, "right")
    lo_v = encode_min(m, [var(left), var(right)], name=f"thmin_{name}_{t}")
    hi_v = encode_max(m, [var(left), var(right)], name=f"thmax_{name}_{t}")
    z = encode_predicate_bool(ctx, pid, t)
    nz = _not_z(ctx, pid, t)
    w1 = encode_binary_product(m, z, var(lo_v), name=f"w1_{name}_{t}")
    w0 = encode_binary_product(m, nz, var(hi_v), name=f"w0_{name}_{t}")
    th = ctx.rob_var(-ctx.H, ctx.H, f"th_{name}_{t}")
    m.add_constraint(var(th) - var(w1) - var(w0), "=", 0, name=f"th_{name}_{t}_def")
    ctx.cache[key] = th
    return th


# -- formulas ----------------------------------------------------------------

def _flatten(phi: Formula, cls) -> list[Formula]:
    if isinstance(phi, cls):
        return _flatten(phi.left, cls) + _flatten(phi.right, cls)
    return [phi]


def _check(ctx: EncodingContext, phi: Formula, t: int) -> None:
    if t < 0 or t + formula_length(phi) > ctx.H:
        raise HorizonError(f"formula of length {formula_length(phi)} at t={t} exceeds horizon {ctx.H}")


def encode_formula_theta(ctx: EncodingContext, phi: Formula, t: int = 0, kind: Kind = "theta") -> VarId:
    """Variable whose every feasible value equals the ``kind`` robustness of ``phi`` at ``t``."""
    if kind not in KINDS:
        raise ValueError(f"unknown robustness kind {kind!r}")
    _check(ctx, phi, t)
    return _theta(ctx, phi, t, kind)


def _theta(ctx: EncodingContext, phi: Formula, t: int, kind: Kind) -> VarId:
    key = (kind, phi, t)
    if key in ctx.cache:
        return ctx.cache[key]
    m = ctx.model
    name = f"{_PREFIX[kind]}_{ctx.node_name(phi)}_{t}"
    if isinstance(phi, Pred):
        if kind == "theta":
            v = encode_theta_pred(ctx, phi.id, t)
        else:
            v = encode_theta_directional(ctx, phi.id, t, "left" if kind == "theta_left" else "right")
    elif isinstance(phi, Not):
        child = _theta(ctx, phi.child, t, kind)
        lo, hi = m.bounds(var(child))
        v = ctx.rob_var(-hi, -lo, name)
        m.add_constraint(var(v) + var(child), "=", 0, name=f"{name}_def")
    elif isinstance(phi, (And, Or)):
        parts = _flatten(phi, type(phi))
        inputs = [var(_theta(ctx, c, t, kind)) for c in parts]
        v = (encode_min if isinstance(phi, And) else encode_max)(m, inputs, name=name)
    elif isinstance(phi, (Eventually, Always)):
        lo, hi = phi.interval.lo, phi.interval.hi
        inputs = [var(_theta(ctx, phi.child, s, kind)) for s in range(t + lo, t + hi + 1)]
        v = (encode_max if isinstance(phi, Eventually) else encode_min)(m, inputs, name=name)
    elif isinstance(phi, Until):
        lo, hi = phi.interval.lo, phi.interval.hi
        branches = []
        prefix = None  # running min of the left operand over [t, s)
        for s in range(t, t + hi + 1):
            if s >= t + lo:
                right = var(_theta(ctx, phi.right, s, kind))
                if prefix is None:
                    branches.append(right)
                else:
                    branches.append(var(encode_min(m, [right, var(prefix)], name=f"{name}_br{s}")))
            if s < t + hi:
                left = _theta(ctx, phi.left, s, kind)
                prefix = left if prefix is None else encode_min(m, [var(prefix), var(left)], name=f"{name}_pre{s}")
        v = encode_max(m, branches, name=name)
    else:
        raise TypeError(f"not a formula node: {phi!r}")
    ctx.cache[key] = v
    return v


def _bool_and(m: Model, inputs: list[VarId], name: str) -> VarId:
    inputs = list(dict.fromkeys(inputs))  # repeated operands would double-count in the sum row
    q = m.add_var(VarKind.BINARY, name=name)
    if len(inputs) == 1:
        m.add_constraint(var(q) - var(inputs[0]), "=", 0, name=f"{name}_eq")
        return q
    for i, x in enumerate(inputs):
        m.add_constraint(var(q) - var(x), "<=", 0, name=f"{name}_ub{i}")
    m.add_constraint(var(q) - LinearExpr({x: 1.0 for x in inputs}), ">=", 1 - len(inputs), name=f"{name}_lb")
    return q


def _bool_or(m: Model, inputs: list[VarId], name: str) -> VarId:
    inputs = list(dict.fromkeys(inputs))  # repeated operands would double-count in the sum row
    q = m.add_var(VarKind.BINARY, name=name)
    if len(inputs) == 1:
        m.add_constraint(var(q) - var(inputs[0]), "=", 0, name=f"{name}_eq")
        return q
    for i, x in enumerate(inputs):
        m.add_constraint(var(q) - var(x), ">=", 0, name=f"{name}_lb{i}")
    m.add_constraint(var(q) - LinearExpr({x: 1.0 for x in inputs}), "<=", 0, name=f"{name}_ub")
    return q


def encode_formula_bool(ctx: EncodingContext, phi: Formula, t: int = 0) -> VarId:
    """Binary equal to 1 exactly when ``phi`` holds at ``t``."""
    _check(ctx, phi, t)
    return _bool(ctx, phi, t)


def _bool(ctx: EncodingContext, phi: Formula, t: int) -> VarId:
    key = ("bool", phi, t)
    if key in ctx.cache:
        return ctx.cache[key]
    m = ctx.model
    name = f"q_{ctx.node_name(phi)}_{t}"
    if isinstance(phi, Pred):
        q = encode_predicate_bool(ctx, phi.id, t)
    elif isinstance(phi, Not):
        child = _bool(ctx, phi.child, t)
        q = m.add_var(VarKind.BINARY, name=name)
        m.add_constraint(var(q) + var(child), "=", 1, name=f"{name}_def")
    elif isinstance(phi, (And, Or)):
        inputs = [_bool(ctx, c, t) for c in _flatten(phi, type(phi))]
        q = (_bool_and if isinstance(phi, And) else _bool_or)(m, inputs, name)
    elif isinstance(phi, (Eventually, Always)):
        lo, hi = phi.interval.lo, phi.interval.hi
        inputs = [_bool(ctx, phi.child, s) for s in range(t + lo, t + hi + 1)]
        q = (_bool_or if isinstance(phi, Eventually) else _bool_and)(m, inputs, name)
    elif isinstance(phi, Until):
        lo, hi = phi.interval.lo, phi.interval.hi
        branches = []
        prefix = None
        for s in range(t, t + hi + 1):
            if s >= t + lo:
                right = _bool(ctx, phi.right, s)
                branches.append(right if prefix is None else _bool_and(m, [right, prefix], f"{name}_br{s}"))
            if s < t + hi:
                left = _bool(ctx, phi.left, s)
                prefix = left if prefix is None else _bool_and(m, [prefix, left], f"{name}_pre{s}")
        q = _bool_or(m, branches, name)
    else:
        raise TypeError(f"not a formula node: {phi!r}")
    ctx.cache[key] = q
    return q
