import pytest

from trk.encoding import (
    EncodingContext,
    encode_counters,
    encode_formula_bool,
    encode_formula_theta,
    encode_predicate_bool,
    encode_theta_directional,
    encode_theta_pred,
)
from trk.milp import Model, VarKind, export_lp
from trk.semantics import HorizonError, PredicateSignalSet, theta_left, theta_right
from trk.stl import PredicateTable, formula_length, parse

from conftest import random_formula, sigs_of, table_of
from pinned import check_pinned, pinned_model

T, F_ = 1, -1


def _propagate(m):
    """Fixed-point bound tightening; pinned models collapse to single points."""
    lo = [v.lower for v in m.variables]
    hi = [v.upper for v in m.variables]
    for _ in range(200):
        changed = False
        for c in m.constraints:
            for v, a in c.expr.terms.items():
                others = [(u, b) for u, b in c.expr.terms.items() if u != v]
                rest_lo = sum(min(b * lo[u], b * hi[u]) for u, b in others)
                rest_hi = sum(max(b * lo[u], b * hi[u]) for u, b in others)
                # a * v (sense) rhs - rest
                new_lo, new_hi = -float("inf"), float("inf")
                if c.sense in ("<=", "="):
                    bound = (c.rhs - rest_lo) / a
                    new_hi, new_lo = (bound, new_lo) if a > 0 else (new_hi, bound)
                if c.sense in (">=", "="):
                    bound = (c.rhs - rest_hi) / a
                    if a > 0:
                        new_lo = max(new_lo, bound)
                    else:
                        new_hi = min(new_hi, bound)
                if new_lo > lo[v] + 1e-9:
                    lo[v], changed = new_lo, True
                if new_hi < hi[v] - 1e-9:
                    hi[v], changed = new_hi, True
        if not changed:
            break
    return lo, hi


def test_counters_match_run_lengths():
    table = table_of(1)
    s = sigs_of([T, T, F_, T, T, T, F_, F_])
    m = Model(bigM_time=19)
    ctx = EncodingContext.pinned(m, table, s)
    cnt = encode_counters(ctx, 1)
    lo, hi = _propagate(m)
    val = lambda ids: [lo[v] for v in ids]  # noqa: E731
    assert all(lo[v] == hi[v] for v in cnt.c1 + cnt.c0 + cnt.d1 + cnt.d0)
    assert val(cnt.c1) == [2, 1, 0, 3, 2, 1, 0, 0]
    assert val(cnt.c0) == [0, 0, 1, 0, 0, 0, 2, 1]
    assert val(cnt.d1) == [1, 2, 0, 1, 2, 3, 0, 0]
    assert val(cnt.d0) == [0, 0, 1, 0, 0, 0, 1, 2]
    assert encode_counters(ctx, 1) is cnt


def test_directional_rows_match_semantics():
    table = table_of(1)
    p = parse("p", table)
    s = sigs_of([T, T, F_, T, T, T, F_, F_])
    m = Model(bigM_time=19)
    ctx = EncodingContext.pinned(m, table, s)
    left = [encode_theta_directional(ctx, 1, t, "left") for t in range(8)]
    right = [encode_theta_directional(ctx, 1, t, "right") for t in range(8)]
    lo, _ = _propagate(m)
    assert [lo[v] for v in left] == [theta_left(p, s, t) for t in range(8)]
    assert [lo[v] for v in right] == [theta_right(p, s, t) for t in range(8)]
    with pytest.raises(ValueError):
        encode_theta_directional(ctx, 1, 0, "up")


def test_cache_returns_same_variable():
    table = table_of(2)
    s = sigs_of([T, F_, T, T], [F_, F_, T, T])
    m = Model(bigM_time=11)
    ctx = EncodingContext.pinned(m, table, s)
    phi = parse("F[0,2] p & q", table)
    a = encode_formula_theta(ctx, phi, 0)
    n_vars = len(m.variables)
    assert encode_formula_theta(ctx, phi, 0) == a
    assert len(m.variables) == n_vars
    assert encode_theta_pred(ctx, 1, 1) == encode_theta_pred(ctx, 1, 1)
    assert encode_formula_bool(ctx, phi, 0) == encode_formula_bool(ctx, phi, 0)
    # the same subformula at another time is a different variable
    assert encode_formula_theta(ctx, parse("q", table), 1) != encode_formula_theta(ctx, parse("q", table), 0)


def test_horizon_is_checked():
    table = table_of(1)
    m = Model()
    ctx = EncodingContext.pinned(m, table, sigs_of([T, T, T]))
    with pytest.raises(HorizonError):
        encode_formula_theta(ctx, parse("F[0,3] p", table), 0)
    with pytest.raises(HorizonError):
        encode_predicate_bool(ctx, 1, 5)


def test_predicate_big_m_rows():
    table = PredicateTable.from_specs([{"name": "x_ge_2", "coeffs": [1.0], "offset": -2.0}])
    m = Model(epsilon=1e-6)
    x = m.add_var("continuous", -10, 10, "x")
    ctx = EncodingContext(m, table, 0, state_vars=[[x]])
    z = encode_predicate_bool(ctx, 1, 0)
    assert m[z].kind is VarKind.BINARY
    for xv, zv, ok in [(2.0, 1, True), (2.0, 0, False), (1.99, 0, True), (1.99, 1, False), (10, 1, True), (-10, 0, True)]:
        vals = [0.0] * len(m.variables)
        vals[x], vals[z] = xv, zv
        assert m.check(vals) is ok, (xv, zv)
    # within epsilon of the threshold no z is admissible, so solutions stay sound
    vals = [0.0] * len(m.variables)
    vals[x] = 2.0 - 5e-7
    assert not any(m.check(vals[:z] + [zv] + vals[z + 1:]) for zv in (0, 1))


def test_unpinned_context_needs_states():
    table = table_of(1)
    ctx = EncodingContext(Model(), table, 3)
    with pytest.raises(ValueError):
        encode_predicate_bool(ctx, 1, 0)


def test_names_are_readable():
    table = PredicateTable.symbolic(["a1", "b2"])
    m, _ = pinned_model(parse("a1 U[0,2] b2", table), table, sigs_of([T, T, F_, F_], [F_, T, F_, T]), 0)
    names = {v.name for v in m.variables}
    assert {"z_a1_0", "c1_b2_3", "thl_a1_0", "th_b2_1"} <= names
    assert any(n.startswith("q_n0_") for n in names)


def test_export_is_deterministic():
    table = table_of(2)
    phi = parse("G[0,2](p | !q) & F[1,3] q", table)
    s = sigs_of([T, F_, T, T, F_], [F_, F_, T, T, T])
    assert export_lp(pinned_model(phi, table, s, 0)[0]) == export_lp(pinned_model(phi, table, s, 0)[0])


@pytest.mark.parametrize(
    "text, rows, t",
    [
        ("p | q", ([F_, T, T, T, F_, F_, F_], [F_, F_, T, T, T, T, F_]), 3),
        ("p", ([T, T, T, T, F_],), 2),
        ("F[1,2] p & G[0,1] !q", ([F_, F_, T, T, F_], [F_, F_, F_, T, T]), 1),
        ("p U[1,3] q", ([T, T, T, F_, F_, F_], [F_, F_, F_, T, F_, T]), 0),
        ("p U[0,0] q", ([F_, F_, F_], [T, T, T]), 1),
    ],
)
def test_pinned_examples_match_semantics(text, rows, t):
    table = table_of(len(rows))
    ok, detail = check_pinned(parse(text, table), table, sigs_of(*rows), t)
    assert ok, detail


def test_pinned_random_batch(rng):
    table = table_of(3)
    for _ in range(12):
        phi = random_formula(rng, 3, 3, 4)
        n = formula_length(phi)
        H = n + int(rng.integers(0, 4))
        sigs = PredicateSignalSet(rng.choice([-1, 1], size=(3, H + 1)))
        t = int(rng.integers(0, H - n + 1))
        ok, detail = check_pinned(phi, table, sigs, t)
        assert ok, f"{phi} t={t}: {detail}"


@pytest.mark.parametrize(
    "text, t, rows",
    [
        ("p & p", 6, ([F_, F_, T, T, T, F_, T, T, F_, F_, F_, T, F_],)),
        ("(q | p) & (p & p) & F[0,1] q", 1, ([T, T, T, F_, T, T, T], [F_, T, F_, F_, F_, T, F_])),
        ("p | p", 1, ([F_, F_, T],)),
    ],
)
def test_repeated_operands_regression(text, t, rows):
    table = table_of(len(rows))
    ok, detail = check_pinned(parse(text, table), table, sigs_of(*rows), t)
    assert ok, detail
