"""Combined (two-sided) time robustness for discrete-time STL and MILP control synthesis."""

from .semantics import (
    PredicateSignalSet,
    StateSignal,
    booleanize,
    char,
    robustness,
    shift,
    theta,
    theta_left,
    theta_right,
    verify_bound,
    verify_shift_theorem,
)
from .stl import Interval, LinearPredicate, PredicateTable, formula_length, parse, predicates_of, to_string

__version__ = "0.1.0"
