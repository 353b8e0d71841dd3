"""Boolean and time-robustness semantics over finite discrete signals.

All robustness notions share one boundary convention: a run of constant
truth value is only counted inside the signal domain ``0..H``. This is what
the run-length counters of the MILP encoding compute, so the two agree
exactly. The empty inner infimum of Until saturates at ``H + 1``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

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
    predicates_of,
)

Kind = Literal["theta", "theta_left", "theta_right"]
KINDS: tuple[Kind, ...] = ("theta", "theta_left", "theta_right")


class HorizonError(ValueError):
    """The signal is too short to evaluate a formula at the requested time."""


@dataclass(frozen=True)
class StateSignal:
    states: np.ndarray  # shape (H + 1, n)

    def __post_init__(self):
        states = np.array(self.states, dtype=float)
        if states.ndim != 2 or len(states) == 0:
            raise ValueError("states must be a non-empty (H+1, n) array")
        states.setflags(write=False)
        object.__setattr__(self, "states", states)

    @property
    def H(self) -> int:
        return len(self.states) - 1

    @property
    def dim(self) -> int:
        return self.states.shape[1]


@dataclass(frozen=True)
class PredicateSignalSet:
    """Row ``k - 1`` holds the +-1 truth values of predicate ``k`` for t = 0..H."""

    chi: np.ndarray  # shape (K, H + 1), entries +-1

    def __post_init__(self):
        chi = np.array(self.chi, dtype=np.int8)
        if chi.ndim != 2 or chi.shape[0] == 0 or chi.shape[1] == 0:
            raise ValueError("chi must be a non-empty (K, H+1) array")
        if not np.all(np.abs(chi) == 1):
            raise ValueError("characteristic values must be exactly +1 or -1")
        chi.setflags(write=False)
        object.__setattr__(self, "chi", chi)

    @property
    def H(self) -> int:
        return self.chi.shape[1] - 1

    @property
    def K(self) -> int:
        return self.chi.shape[0]

    def row(self, pid: int) -> np.ndarray:
        return self.chi[pid - 1]

    def __eq__(self, other):
        return isinstance(other, PredicateSignalSet) and np.array_equal(self.chi, other.chi)

    def __hash__(self):
        return hash(self.chi.tobytes())


def booleanize(sig: StateSignal, table: PredicateTable, tol: float = 0.0) -> PredicateSignalSet:
    """Truth values of every predicate along ``sig``; ``mu >= -tol`` counts as satisfied.

    ``tol`` absorbs solver round-off when re-checking optimized trajectories;
    keep it at 0 for exact evaluation.
    """
    if sig.dim != table.dim:
        raise ValueError(f"signal has dimension {sig.dim}, predicates expect {table.dim}")
    A = np.array([p.coeffs for p in table])
    b = np.array([p.offset for p in table])
    mu = sig.states @ A.T + b
    return PredicateSignalSet(np.where(mu >= -tol, 1, -1).T)


def _check_horizon(phi: Formula, sigs: PredicateSignalSet, t: int) -> None:
    n = formula_length(phi)
    if t < 0 or t + n > sigs.H:
        raise HorizonError(f"formula of length {n} at t={t} needs H >= {t + n}, signal has H={sigs.H}")


def _char(phi: Formula, chi: np.ndarray, t: int) -> int:
    if isinstance(phi, Pred):
        return int(chi[phi.id - 1, t])
    if isinstance(phi, Not):
        return -_char(phi.child, chi, t)
    if isinstance(phi, And):
        return min(_char(phi.left, chi, t), _char(phi.right, chi, t))
    if isinstance(phi, Or):
        return max(_char(phi.left, chi, t), _char(phi.right, chi, t))
    if isinstance(phi, Eventually):
        return max(_char(phi.child, chi, s) for s in range(t + phi.interval.lo, t + phi.interval.hi + 1))
    if isinstance(phi, Always):
        return min(_char(phi.child, chi, s) for s in range(t + phi.interval.lo, t + phi.interval.hi + 1))
    if isinstance(phi, Until):
        best = -1
        for s in range(t + phi.interval.lo, t + phi.interval.hi + 1):
            v = _char(phi.right, chi, s)
            for u in range(t, s):
                if v == -1:
                    break
                v = min(v, _char(phi.left, chi, u))
            best = max(best, v)
            if best == 1:
                break
        return best
    raise TypeError(f"not a formula node: {phi!r}")


def char(phi: Formula, sigs: PredicateSignalSet, t: int = 0) -> int:
    """Characteristic function: +1 if the signal satisfies ``phi`` at ``t``, else -1."""
    _check_horizon(phi, sigs, t)
    return _char(phi, sigs.chi, t)


def _run_forward(row: np.ndarray, t: int) -> int:
    n = 0
    while t + n + 1 < len(row) and row[t + n + 1] == row[t]:
        n += 1
    return n


def _run_backward(row: np.ndarray, t: int) -> int:
    n = 0
    while t - n - 1 >= 0 and row[t - n - 1] == row[t]:
        n += 1
    return n


def _pred_rob(row: np.ndarray, t: int, kind: Kind) -> int:
    sign = int(row[t])
    if kind == "theta_left":
        return sign * _run_forward(row, t)
    if kind == "theta_right":
        return sign * _run_backward(row, t)
    return sign * min(_run_forward(row, t), _run_backward(row, t))


def _rob(phi: Formula, chi: np.ndarray, t: int, kind: Kind, cap: int) -> int:
    if isinstance(phi, Pred):
        return _pred_rob(chi[phi.id - 1], t, kind)
    if isinstance(phi, Not):
        return -_rob(phi.child, chi, t, kind, cap)
    if isinstance(phi, And):
        return min(_rob(phi.left, chi, t, kind, cap), _rob(phi.right, chi, t, kind, cap))
    if isinstance(phi, Or):
        return max(_rob(phi.left, chi, t, kind, cap), _rob(phi.right, chi, t, kind, cap))
    if isinstance(phi, Eventually):
        lo, hi = phi.interval.lo, phi.interval.hi
        return max(_rob(phi.child, chi, s, kind, cap) for s in range(t + lo, t + hi + 1))
    if isinstance(phi, Always):
        lo, hi = phi.interval.lo, phi.interval.hi
        return min(_rob(phi.child, chi, s, kind, cap) for s in range(t + lo, t + hi + 1))
    if isinstance(phi, Until):
        lo, hi = phi.interval.lo, phi.interval.hi
        left = [_rob(phi.left, chi, u, kind, cap) for u in range(t, t + hi)]
        best = None
        prefix = cap
        for s in range(t, t + hi + 1):
            if s >= t + lo:
                v = min(_rob(phi.right, chi, s, kind, cap), prefix)
                best = v if best is None else max(best, v)
            if s < t + hi:
                prefix = min(prefix, left[s - t])
        return best
    raise TypeError(f"not a formula node: {phi!r}")


def robustness(phi: Formula, sigs: PredicateSignalSet, t: int = 0, kind: Kind = "theta") -> int:
    """Time robustness of ``kind`` (combined, left or right) at ``t``."""
    if kind not in KINDS:
        raise ValueError(f"unknown robustness kind {kind!r}")
    _check_horizon(phi, sigs, t)
    return _rob(phi, sigs.chi, t, kind, sigs.H + 1)


def theta(phi: Formula, sigs: PredicateSignalSet, t: int = 0) -> int:
    """Combined temporal robustness: the largest per-predicate shift, in either direction, that is provably harmless."""
    return robustness(phi, sigs, t, "theta")


def theta_left(phi: Formula, sigs: PredicateSignalSet, t: int = 0) -> int:
    return robustness(phi, sigs, t, "theta_left")


def theta_right(phi: Formula, sigs: PredicateSignalSet, t: int = 0) -> int:
    return robustness(phi, sigs, t, "theta_right")


def shift(sigs: PredicateSignalSet, tau: Sequence[int]) -> PredicateSignalSet:
    """Asynchronous shift: row k at time t reads the original at ``t + tau[k]``.

    Reads past either end repeat the boundary value.
    """
    tau = [int(v) for v in tau]
    if len(tau) != sigs.K:
        raise ValueError(f"shift vector has length {len(tau)}, expected {sigs.K}")
    idx = np.arange(sigs.H + 1)
    out = np.empty_like(sigs.chi)
    for k, tk in enumerate(tau):
        out[k] = sigs.chi[k, np.clip(idx + tk, 0, sigs.H)]
    return PredicateSignalSet(out)


def read_span(phi: Formula, t: int) -> dict[int, tuple[int, int]]:
    """Earliest and latest time at which evaluating ``phi`` at ``t`` reads each predicate."""
    spans: dict[int, tuple[int, int]] = {}

    def visit(node: Formula, lo: int, hi: int) -> None:
        if isinstance(node, Pred):
            a, b = spans.get(node.id, (lo, hi))
            spans[node.id] = (min(a, lo), max(b, hi))
        elif isinstance(node, Not):
            visit(node.child, lo, hi)
        elif isinstance(node, (And, Or)):
            visit(node.left, lo, hi)
            visit(node.right, lo, hi)
        elif isinstance(node, (Eventually, Always)):
            visit(node.child, lo + node.interval.lo, hi + node.interval.hi)
        elif isinstance(node, Until):
            if node.interval.hi > 0:
                visit(node.left, lo, hi + node.interval.hi - 1)
            visit(node.right, lo + node.interval.lo, hi + node.interval.hi)

    visit(phi, t, t)
    return spans


@dataclass
class ShiftReport:
    radius: int
    checked: int
    exhaustive: bool
    violations: list[tuple[int, ...]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def verify_shift_theorem(
    phi: Formula,
    sigs: PredicateSignalSet,
    t: int = 0,
    *,
    exhaustive_limit: int = 100_000,
    samples: int = 10_000,
    rng: np.random.Generator | int | None = 0,
) -> ShiftReport:
    """Check that every asynchronous shift bounded by ``|theta|`` preserves satisfaction at ``t``.

    Only shifts whose reads all stay inside ``0..H`` are tested. Predicates
    absent from ``phi``, or never read by it (the left side of ``U[0,0]``),
    keep a zero shift since they cannot matter. The
    search is exhaustive when the candidate box has at most
    ``exhaustive_limit`` vectors, otherwise ``samples`` vectors are drawn
    uniformly from it.
    """
    r = abs(theta(phi, sigs, t))
    reference = _char(phi, sigs.chi, t)
    spans = read_span(phi, t)
    used = [pid for pid in predicates_of(phi) if pid in spans]
    ranges = []
    for pid in used:
        lo, hi = spans[pid]
        ranges.append(range(max(-r, -lo), min(r, sigs.H - hi) + 1))

    size = 1
    for rg in ranges:
        size *= len(rg)

    def full(partial) -> tuple[int, ...]:
        tau = [0] * sigs.K
        for pid, v in zip(used, partial):
            tau[pid - 1] = int(v)
        return tuple(tau)

    if size <= exhaustive_limit:
        candidates = (full(p) for p in itertools.product(*ranges))
        exhaustive = True
        checked = size
    else:
        gen = np.random.default_rng(rng)
        draws = np.column_stack([gen.integers(rg.start, rg.stop, size=samples) for rg in ranges])
        candidates = (full(p) for p in draws)
        exhaustive = False
        checked = samples

    report = ShiftReport(radius=r, checked=checked, exhaustive=exhaustive)
    for tau in candidates:
        if _char(phi, shift(sigs, tau).chi, t) != reference:
            report.violations.append(tau)
    return report


def verify_bound(phi: Formula, sigs: PredicateSignalSet, t: int = 0) -> bool:
    """Whether ``|theta| <= min(|theta_left|, |theta_right|)`` at ``t``."""
    th = abs(theta(phi, sigs, t))
    return th <= abs(theta_left(phi, sigs, t)) and th <= abs(theta_right(phi, sigs, t))


def evaluate_all(phi: Formula, sigs: PredicateSignalSet, t: int = 0) -> dict[str, int]:
    """Characteristic value and all three robustness values at ``t``."""
    out = {"char": char(phi, sigs, t)}
    for kind in KINDS:
        out[kind] = robustness(phi, sigs, t, kind)
    return out
