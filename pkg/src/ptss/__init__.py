"""Probabilistic transition system specifications: parsing, rule-format
checks, expansivity analysis, an executable semantics and approximate
bisimulation distances."""

from .bisim import (
    DistanceResult, Relation, VerifyReport, distance, greatest_epsilon_bisim,
    is_epsilon_bisim, lift_check, strict_bisim, verify_expansivity_bound,
)
from .engine import Budget, Engine, Pts, derive_transitions, reachable_fragment
from .expansivity import (
    INF, ExpansivityTable, apply_m, expansivity_bound, jacobi, lfp_expansivity,
)
from .formats import (
    ArgIndependent, NonExpansive, PNorm, check_entmuft_rule, check_entmuft_spec,
    check_requirement, discriminating_power,
)
from .syntax import (
    Diagnostic, Ptss, Rule, Signature, SpecError, expand_ntmuxt, parse_spec,
    parse_term, render_spec,
)
from .terms import App, Distribution, Var, render_state

__version__ = "0.1.0"
