"""Discrete-time STL formulas over linear predicates.

Formulas are immutable trees of frozen dataclasses, so structurally equal
subformulas compare and hash equal. Leaves reference predicates by their
integer id in a :class:`PredicateTable`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence, Union

import numpy as np


@dataclass(frozen=True)
class LinearPredicate:
    """Affine predicate ``coeffs . x + offset >= 0``."""

    id: int
    coeffs: tuple[float, ...]
    offset: float = 0.0
    name: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
        object.__setattr__(self, "offset", float(self.offset))
        if not self.coeffs or not any(c != 0.0 for c in self.coeffs):
            raise ValueError(f"predicate {self.label!r} needs a nonzero coefficient")

    @property
    def label(self) -> str:
        return self.name if self.name is not None else f"p{self.id}"

    @property
    def dim(self) -> int:
        return len(self.coeffs)

    def mu(self, x) -> float:
        return float(np.dot(self.coeffs, x) + self.offset)


class PredicateTable:
    """Ordered predicate set with contiguous ids 1..K."""

    def __init__(self, predicates: Sequence[LinearPredicate]):
        predicates = tuple(predicates)
        if not predicates:
            raise ValueError("a predicate table needs at least one predicate")
        for k, p in enumerate(predicates, start=1):
            if p.id != k:
                raise ValueError(f"predicate ids must be 1..K in order, got {p.id} at position {k}")
        dims = {p.dim for p in predicates}
        if len(dims) != 1:
            raise ValueError(f"predicates disagree on state dimension: {sorted(dims)}")
        labels = [p.label for p in predicates]
        if len(set(labels)) != len(labels):
            raise ValueError("predicate names must be unique")
        self._predicates = predicates
        self._by_name = {p.label: p for p in predicates}

    @classmethod
    def from_specs(cls, specs: Iterable[dict]) -> "PredicateTable":
        """Build from ``{"name", "coeffs", "offset"}`` mappings (scenario file layout)."""
        return cls([
            LinearPredicate(k, tuple(s["coeffs"]), s.get("offset", 0.0), s.get("name"))
            for k, s in enumerate(specs, start=1)
        ])

    @classmethod
    def symbolic(cls, names: Sequence[str]) -> "PredicateTable":
        """Table for raw truth-value signals: predicate k reads coordinate k of a +-1 vector."""
        K = len(names)
        return cls([
            LinearPredicate(k, tuple(1.0 if j == k - 1 else 0.0 for j in range(K)), 0.0, name)
            for k, name in enumerate(names, start=1)
        ])

    @property
    def K(self) -> int:
        return len(self._predicates)

    @property
    def dim(self) -> int:
        return self._predicates[0].dim

    @property
    def names(self) -> list[str]:
        return [p.label for p in self._predicates]

    def __len__(self) -> int:
        return len(self._predicates)

    def __iter__(self) -> Iterator[LinearPredicate]:
        return iter(self._predicates)

    def __getitem__(self, pid: int) -> LinearPredicate:
        if not 1 <= pid <= len(self._predicates):
            raise KeyError(pid)
        return self._predicates[pid - 1]

    def by_name(self, name: str) -> LinearPredicate:
        return self._by_name[name]

    def __contains__(self, name: str) -> bool:
        return name in self._by_name

    def to_specs(self) -> list[dict]:
        return [{"name": p.label, "coeffs": list(p.coeffs), "offset": p.offset} for p in self]


@dataclass(frozen=True)
class Interval:
    lo: int
    hi: int

    def __post_init__(self):
        if self.lo < 0 or self.hi < 0:
            raise ValueError(f"negative interval bound in [{self.lo},{self.hi}]")
        if self.lo > self.hi:
            raise ValueError(f"empty interval [{self.lo},{self.hi}]")

    def __str__(self) -> str:
        return f"[{self.lo},{self.hi}]"


@dataclass(frozen=True)
class Pred:
    id: int
    name: str


@dataclass(frozen=True)
class Not:
    child: "Formula"


@dataclass(frozen=True)
class And:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Or:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Until:
    interval: Interval
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Eventually:
    interval: Interval
    child: "Formula"


@dataclass(frozen=True)
class Always:
    interval: Interval
    child: "Formula"


Formula = Union[Pred, Not, And, Or, Until, Eventually, Always]


def children(phi: Formula) -> tuple[Formula, ...]:
    if isinstance(phi, Pred):
        return ()
    if isinstance(phi, (Not, Eventually, Always)):
        return (phi.child,)
    return (phi.left, phi.right)


def formula_length(phi: Formula) -> int:
    """Farthest time offset from the evaluation time that ``phi`` can read."""
    if isinstance(phi, Pred):
        return 0
    if isinstance(phi, Not):
        return formula_length(phi.child)
    if isinstance(phi, (And, Or)):
        return max(formula_length(phi.left), formula_length(phi.right))
    if isinstance(phi, (Eventually, Always)):
        return phi.interval.hi + formula_length(phi.child)
    if isinstance(phi, Until):
        return phi.interval.hi + max(formula_length(phi.left), formula_length(phi.right))
    raise TypeError(f"not a formula node: {phi!r}")


def predicates_of(phi: Formula) -> list[int]:
    """Predicate ids of ``phi`` without duplicates, in first-occurrence order."""
    seen: dict[int, None] = {}
    stack = [phi]
    while stack:
        node = stack.pop()
        if isinstance(node, Pred):
            seen.setdefault(node.id, None)
        else:
            stack.extend(reversed(children(node)))
    return list(seen)


def subformulas(phi: Formula) -> Iterator[Formula]:
    """Preorder walk."""
    yield phi
    for c in children(phi):
        yield from subformulas(c)


def check_against(phi: Formula, table: PredicateTable) -> None:
    for node in subformulas(phi):
        if isinstance(node, Pred):
            if not 1 <= node.id <= table.K or table[node.id].label != node.name:
                raise ValueError(f"predicate {node.name!r} (id {node.id}) is not in the table")


# -- printing ----------------------------------------------------------------

def _wrap(phi: Formula) -> str:
    s = to_string(phi)
    return s if isinstance(phi, Pred) else f"({s})"


def to_string(phi: Formula) -> str:
    """Render ``phi`` in the ASCII grammar accepted by :func:`parse`."""
    if isinstance(phi, Pred):
        return phi.name
    if isinstance(phi, Not):
        return "!" + _wrap(phi.child)
    if isinstance(phi, And):
        return f"{_wrap(phi.left)} & {_wrap(phi.right)}"
    if isinstance(phi, Or):
        return f"{_wrap(phi.left)} | {_wrap(phi.right)}"
    if isinstance(phi, Until):
        return f"{_wrap(phi.left)} U{phi.interval} {_wrap(phi.right)}"
    if isinstance(phi, Eventually):
        return f"F{phi.interval} {_wrap(phi.child)}"
    if isinstance(phi, Always):
        return f"G{phi.interval} {_wrap(phi.child)}"
    raise TypeError(f"not a formula node: {phi!r}")


# -- parsing -----------------------------------------------------------------

class FormulaSyntaxError(ValueError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class UnknownPredicateError(FormulaSyntaxError):
    pass


_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>-?\d+)|(?P<op>[FGU])\s*(?=\[)|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)|(?P<sym>[!&|()\[\],]))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            start = pos + len(text[pos:]) - len(text[pos:].lstrip())
            raise FormulaSyntaxError(f"unexpected character {text[start]!r}", start)
        kind = m.lastgroup
        value = m.group(kind)
        tokens.append((kind, value, m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, table: PredicateTable):
        self.tokens = _tokenize(text)
        self.i = 0
        self.table = table

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, val, pos = self.take()
        if val != value or kind not in ("sym",):
            raise FormulaSyntaxError(f"expected {value!r}, found {val or 'end of input'!r}", pos)

    def formula(self) -> Formula:
        phi = self.or_expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise FormulaSyntaxError(f"unexpected {val!r}", pos)
        return phi

    def or_expr(self) -> Formula:
        phi = self.and_expr()
        while self.peek()[1] == "|" and self.peek()[0] == "sym":
            self.take()
            phi = Or(phi, self.and_expr())
        return phi

    def and_expr(self) -> Formula:
        phi = self.until_expr()
        while self.peek()[1] == "&" and self.peek()[0] == "sym":
            self.take()
            phi = And(phi, self.until_expr())
        return phi

    def until_expr(self) -> Formula:
        phi = self.unary()
        while self.peek()[0] == "op" and self.peek()[1] == "U":
            self.take()
            interval = self.interval()
            phi = Until(interval, phi, self.unary())
        return phi

    def unary(self) -> Formula:
        kind, val, pos = self.peek()
        if kind == "sym" and val == "!":
            self.take()
            return Not(self.unary())
        if kind == "op" and val in "FG":
            self.take()
            interval = self.interval()
            child = self.unary()
            return Eventually(interval, child) if val == "F" else Always(interval, child)
        if kind == "op":
            raise FormulaSyntaxError("'U' needs a left operand", pos)
        return self.atom()

    def atom(self) -> Formula:
        kind, val, pos = self.take()
        if kind == "ident":
            if val not in self.table:
                raise UnknownPredicateError(f"unknown predicate {val!r}", pos)
            p = self.table.by_name(val)
            return Pred(p.id, p.label)
        if kind == "sym" and val == "(":
            phi = self.or_expr()
            self.expect(")")
            return phi
        raise FormulaSyntaxError(f"unexpected {val or 'end of input'!r}", pos)

    def interval(self) -> Interval:
        self.expect("[")
        lo, lo_pos = self.bound()
        self.expect(",")
        hi, _ = self.bound()
        self.expect("]")
        if lo > hi:
            raise FormulaSyntaxError(f"interval [{lo},{hi}] has lo > hi", lo_pos)
        return Interval(lo, hi)

    def bound(self) -> tuple[int, int]:
        kind, val, pos = self.take()
        if kind != "num":
            raise FormulaSyntaxError(f"expected an integer bound, found {val or 'end of input'!r}", pos)
        if val.startswith("-"):
            raise FormulaSyntaxError(f"negative interval bound {val}", pos)
        return int(val), pos


def parse(text: str, table: PredicateTable) -> Formula:
    """Parse ``text`` against ``table``.

    Precedence from tightest: ``!``/``F[a,b]``/``G[a,b]``, then ``U[a,b]``,
    then ``&``, then ``|``. Binary operators associate to the left.
    """
    return _Parser(text, table).formula()
