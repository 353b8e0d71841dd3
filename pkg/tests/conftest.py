import numpy as np
import pytest
from hypothesis import strategies as st

from trk.semantics import PredicateSignalSet
from trk.stl import Always, And, Eventually, Interval, Not, Or, Pred, PredicateTable, Until

NAMES = ("p", "q", "r")


def table_of(k: int) -> PredicateTable:
    return PredicateTable.symbolic(list(NAMES[:k]))


def sigs_of(*rows) -> PredicateSignalSet:
    return PredicateSignalSet(np.array(rows))


def intervals(max_hi: int = 3):
    return st.tuples(st.integers(0, max_hi), st.integers(0, max_hi)).map(lambda ab: Interval(min(ab), max(ab)))


def formulas(k: int = 3, depth: int = 3, max_hi: int = 3):
    """Formula trees over predicates ``NAMES[:k]`` with at most ``depth`` operator levels."""
    leaf = st.integers(1, k).map(lambda i: Pred(i, NAMES[i - 1]))

    def extend(children):
        return st.one_of(
            children.map(Not),
            st.builds(And, children, children),
            st.builds(Or, children, children),
            st.builds(Until, intervals(max_hi), children, children),
            st.builds(Eventually, intervals(max_hi), children),
            st.builds(Always, intervals(max_hi), children),
        )

    return st.recursive(leaf, extend, max_leaves=2 ** depth).filter(lambda f: _depth(f) <= depth)


def _depth(phi) -> int:
    if isinstance(phi, Pred):
        return 0
    kids = [getattr(phi, a) for a in ("child", "left", "right") if hasattr(phi, a)]
    return 1 + max(_depth(c) for c in kids)


def random_formula(rng: np.random.Generator, k: int, depth: int, max_hi: int = 3):
    """Non-hypothesis generator for the large fixed-seed acceptance batches."""
    if depth == 0 or rng.random() < 0.2:
        i = int(rng.integers(1, k + 1))
        return Pred(i, NAMES[i - 1])
    op = int(rng.integers(0, 6))

    def sub():
        return random_formula(rng, k, depth - 1, max_hi)

    def iv():
        a, b = sorted(int(v) for v in rng.integers(0, max_hi + 1, size=2))
        return Interval(a, b)

    if op == 0:
        return Not(sub())
    if op == 1:
        return And(sub(), sub())
    if op == 2:
        return Or(sub(), sub())
    if op == 3:
        return Until(iv(), sub(), sub())
    if op == 4:
        return Eventually(iv(), sub())
    return Always(iv(), sub())


@pytest.fixture
def rng():
    return np.random.default_rng(20221203)


# -- acceptance reporting ----------------------------------------------------

_ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def record():
    """``record(n, ok, detail)`` stores one summary line per acceptance criterion."""

    def _record(n: int, ok: bool, detail: str) -> None:
        _ACCEPTANCE[n] = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"

    return _record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[n])
