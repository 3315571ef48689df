"""Syntactic rule-format checks.

Discriminating power marks operator arguments whose behaviour is tested by
some premise.  The non-expansive rule format bounds, per source variable,
the number of copies of the variable and of its derivatives in the rule
target.  Requirement verdicts read an expansivity table and are sufficient
conditions only: a failing check means "not guaranteed", never "expansive".
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Tuple, Union

from .syntax import FSource, Ptss, Rule
from .terms import DVar, Var, mvar_dist, mvar_state, state_vars

PASS = "pass"
NOT_GUARANTEED = "not-guaranteed"


class UnknownOperator(KeyError):
    pass


def discriminating_power(p: Ptss) -> Dict[Tuple[str, int], int]:
    """chi[(f, i)] = 1 iff the i-th source variable of some f-rule occurs on
    the left-hand side of a positive or negative premise (1-based i)."""
    chi = {(f, i): 0 for f, n in p.signature.ops for i in range(1, n + 1)}
    for r in p.rules:
        if not isinstance(r.source, FSource):
            continue
        tested = set()
        for q in (*r.pos, *r.neg):
            tested.update(state_vars(q.lhs))
        for i, x in enumerate(r.source.vars, start=1):
            if x in tested:
                chi[(r.source.op, i)] = 1
    return chi


@dataclass(frozen=True)
class Violation:
    var: str
    sum: int
    limit: int = 1


def copy_count(rule: Rule, x: str) -> int:
    """Occurrences of source variable ``x`` in the target plus, for every
    positive premise, occurrences in its left-hand side times the copies of
    its derivative in the target."""
    target = rule.target
    total = mvar_dist(target, Var(x))
    for q in rule.pos:
        total += mvar_state(q.lhs, Var(x)) * mvar_dist(target, DVar(q.derivative))
    return total


def check_entmuft_rule(rule: Rule) -> Tuple[bool, List[Violation]]:
    if not isinstance(rule.source, FSource):
        raise ValueError(f"rule {rule.name} has a variable source; expand it first")
    violations = []
    for x in rule.source.vars:
        s = copy_count(rule, x)
        if s > 1:
            violations.append(Violation(x, s))
    return not violations, violations


@dataclass(frozen=True)
class FormatReport:
    per_rule: Tuple[Tuple[str, bool, Tuple[Violation, ...]], ...]

    @property
    def overall(self) -> bool:
        return all(ok for _, ok, _ in self.per_rule)

    def verdict(self, name: str) -> bool:
        for n, ok, _ in self.per_rule:
            if n == name:
                return ok
        raise KeyError(name)

    def violations(self, name: str) -> Tuple[Violation, ...]:
        for n, _, v in self.per_rule:
            if n == name:
                return v
        raise KeyError(name)

    def to_json(self) -> list:
        return [{"name": n, "entmuft": ok,
                 "violations": [{"var": v.var, "sum": v.sum, "limit": v.limit} for v in vs]}
                for n, ok, vs in self.per_rule]


def check_entmuft_spec(p: Ptss) -> FormatReport:
    rows = []
    for r in p.rules:
        ok, vs = check_entmuft_rule(r)
        rows.append((r.name, ok, tuple(vs)))
    return FormatReport(tuple(rows))


# -- compositionality requirements --------------------------------------------

@dataclass(frozen=True)
class NonExpansive:
    operator: Optional[str] = None
    kind = "non-expansive"


@dataclass(frozen=True)
class ArgIndependent:
    operator: str
    index: int
    kind = "arg-independent"


@dataclass(frozen=True)
class PNorm:
    p: float
    operator: Optional[str] = None
    kind = "p-norm"

    def __post_init__(self) -> None:
        if not self.p > 1:
            raise ValueError("p-norm requirement needs p > 1")


Requirement = Union[NonExpansive, ArgIndependent, PNorm]


def parse_requirement(text: str) -> Requirement:
    """``non-expansive``, ``p-norm=P`` or ``arg-independent=f:i``."""
    if text == "non-expansive":
        return NonExpansive()
    if text.startswith("p-norm="):
        return PNorm(float(text.split("=", 1)[1]))
    if text.startswith("arg-independent="):
        op, _, idx = text.split("=", 1)[1].rpartition(":")
        if not op:
            raise ValueError("arg-independent expects f:i")
        return ArgIndependent(op, int(idx))
    raise ValueError(f"unknown requirement {text!r}")


def check_requirement(omega: Mapping[Tuple[str, int], float], arities: Mapping[str, int],
                      req: Requirement) -> Dict[str, str]:
    """Verdict per operator: ``pass`` when the expansivity powers guarantee the
    requirement, ``not-guaranteed`` otherwise."""
    if req.operator is not None and req.operator not in arities:
        raise UnknownOperator(req.operator)
    ops = [req.operator] if req.operator is not None else list(arities)

    def row(f):
        return [omega[(f, i)] for i in range(1, arities[f] + 1)]

    out = {}
    if isinstance(req, ArgIndependent):
        if not 1 <= req.index <= arities[req.operator]:
            raise ValueError(f"{req.operator} has no argument {req.index}")
        ok = omega[(req.operator, req.index)] == 0
        return {req.operator: PASS if ok else NOT_GUARANTEED}
    for f in ops:
        w = row(f)
        if isinstance(req, NonExpansive):
            ok = all(v <= 1 for v in w)
        else:
            ok = all(v in (0, 1) for v in w) and sum(1 for v in w if v == 1) <= 1
        out[f] = PASS if ok else NOT_GUARANTEED
    return out
