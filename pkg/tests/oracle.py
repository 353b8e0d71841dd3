"""Definition-level reference evaluator used only by the tests.

Derived operators are reduced to the core syntax (predicate, negation,
conjunction, Until, with a true constant), and predicate robustness is the
literal supremum over window radii. Nothing here shares code with
``trk.semantics``.
"""

from dataclasses import dataclass

from trk.stl import Always, And, Eventually, Not, Or, Pred, Until


@dataclass(frozen=True)
class Top:
    pass


def desugar(phi):
    if isinstance(phi, Pred):
        return phi
    if isinstance(phi, Not):
        return Not(desugar(phi.child))
    if isinstance(phi, And):
        return And(desugar(phi.left), desugar(phi.right))
    if isinstance(phi, Or):
        return Not(And(Not(desugar(phi.left)), Not(desugar(phi.right))))
    if isinstance(phi, Until):
        return Until(phi.interval, desugar(phi.left), desugar(phi.right))
    if isinstance(phi, Eventually):
        return Until(phi.interval, Top(), desugar(phi.child))
    if isinstance(phi, Always):
        return Not(Until(phi.interval, Top(), Not(desugar(phi.child))))
    raise TypeError(phi)


def _window_ok(row, t, lo_off, hi_off):
    H = len(row) - 1
    if t - lo_off < 0 or t + hi_off > H:
        return False
    return all(row[s] == row[t] for s in range(t - lo_off, t + hi_off + 1))


def pred_rob(row, t, kind):
    H = len(row) - 1
    best = 0
    for tau in range(H + 2):
        if kind == "theta":
            ok = _window_ok(row, t, tau, tau)
        elif kind == "theta_left":
            ok = _window_ok(row, t, 0, tau)
        else:
            ok = _window_ok(row, t, tau, 0)
        if ok:
            best = tau
    return int(row[t]) * best


def _core_rob(phi, chi, t, kind, cap):
    if isinstance(phi, Top):
        return cap
    if isinstance(phi, Pred):
        return pred_rob(list(chi[phi.id - 1]), t, kind)
    if isinstance(phi, Not):
        return -_core_rob(phi.child, chi, t, kind, cap)
    if isinstance(phi, And):
        return min(_core_rob(phi.left, chi, t, kind, cap), _core_rob(phi.right, chi, t, kind, cap))
    if isinstance(phi, Until):
        vals = []
        for s in range(t + phi.interval.lo, t + phi.interval.hi + 1):
            inner = [_core_rob(phi.left, chi, u, kind, cap) for u in range(t, s)]
            vals.append(min([_core_rob(phi.right, chi, s, kind, cap)] + inner + [cap]))
        return max(vals)
    raise TypeError(phi)


def _core_char(phi, chi, t):
    if isinstance(phi, Top):
        return 1
    if isinstance(phi, Pred):
        return int(chi[phi.id - 1][t])
    if isinstance(phi, Not):
        return -_core_char(phi.child, chi, t)
    if isinstance(phi, And):
        return min(_core_char(phi.left, chi, t), _core_char(phi.right, chi, t))
    if isinstance(phi, Until):
        vals = []
        for s in range(t + phi.interval.lo, t + phi.interval.hi + 1):
            inner = [_core_char(phi.left, chi, u) for u in range(t, s)]
            vals.append(min([_core_char(phi.right, chi, s)] + inner))
        return max(vals)
    raise TypeError(phi)


def oracle_rob(phi, chi, t, kind="theta"):
    H = len(chi[0]) - 1
    return _core_rob(desugar(phi), chi, t, kind, H + 1)


def oracle_char(phi, chi, t):
    return _core_char(desugar(phi), chi, t)
