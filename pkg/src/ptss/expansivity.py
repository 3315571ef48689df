"""Expansivity powers of operators as a least fixed point over N ∪ {inf}.

For every operator argument ``(f, i)`` the analyzer computes how often, and
under which operator contexts, the i-th argument of ``f`` (or one of its
derivatives) is copied into rule targets.  Weighted multiplicities of
variables in terms are not tabulated; they are recomputed structurally from
the per-argument table whenever needed.

Values are Python ints with ``math.inf`` for infinity.  ``mul`` implements
the ``0 * inf = 0`` convention that float arithmetic lacks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

from .formats import UnknownOperator, discriminating_power
from .syntax import Ptss, Rule, XSource, expand_ntmuxt
from .terms import App, Convex, Dirac, DistTerm, DVar, Lift, StateTerm, Var, Variable

INF = math.inf
NInfty = Union[int, float]
Table = Dict[Tuple[str, int], NInfty]


class NotAFixpoint(RuntimeError):
    """The analyzer result failed its fixed-point re-check."""


class EpsOutOfRange(ValueError):
    pass


def add(a: NInfty, b: NInfty) -> NInfty:
    return INF if INF in (a, b) else a + b


def mul(a: NInfty, b: NInfty) -> NInfty:
    if a == 0 or b == 0:
        return 0
    if a == INF or b == INF:
        # huge ints cannot be promoted to float
        return INF
    return a * b


def render(v: NInfty) -> Union[int, str]:
    return "inf" if v == INF else int(v)


def weighted_multiplicity_state(m_f: Mapping[Tuple[str, int], NInfty],
                                t: StateTerm, zeta: Variable) -> NInfty:
    if isinstance(t, Var):
        return 1 if isinstance(zeta, Var) and zeta.name == t.name else 0
    if isinstance(t, App):
        total: NInfty = 0
        for i, a in enumerate(t.args, start=1):
            w = m_f.get((t.op, i), 0)
            total = add(total, mul(w, weighted_multiplicity_state(m_f, a, zeta)))
        return total
    return 0


def weighted_multiplicity_dist(m_f: Mapping[Tuple[str, int], NInfty],
                               chi: Mapping[Tuple[str, int], int],
                               theta: DistTerm, zeta: Variable) -> NInfty:
    """Like the state version, but a lifted operator weighs each argument by at
    least its discriminating power."""
    if isinstance(theta, DVar):
        return 1 if isinstance(zeta, DVar) and zeta.name == theta.name else 0
    if isinstance(theta, Dirac):
        return weighted_multiplicity_state(m_f, theta.term, zeta)
    if isinstance(theta, Convex):
        return max(weighted_multiplicity_dist(m_f, chi, b, zeta) for _, b in theta.parts)
    if isinstance(theta, Lift):
        total: NInfty = 0
        for i, a in enumerate(theta.args, start=1):
            w = max(m_f.get((theta.op, i), 0), chi.get((theta.op, i), 0))
            total = add(total, mul(w, weighted_multiplicity_dist(m_f, chi, a, zeta)))
        return total
    return 0


def rule_power(m_f, chi, rule: Rule, x: str) -> NInfty:
    target = rule.target
    total = weighted_multiplicity_dist(m_f, chi, target, Var(x))
    for q in rule.pos:
        total = add(total, mul(weighted_multiplicity_state(m_f, q.lhs, Var(x)),
                               weighted_multiplicity_dist(m_f, chi, target, DVar(q.derivative))))
    return total


class _Index:
    """Rules grouped by defining operator, plus the ordered unknowns."""

    def __init__(self, p: Ptss):
        if any(isinstance(r.source, XSource) for r in p.rules):
            raise ValueError("expand variable-source rules before analysis")
        self.unknowns = [(f, i) for f, n in p.signature.ops for i in range(1, n + 1)]
        self.by_op: Dict[str, List[Rule]] = {f: [] for f in p.signature}
        for r in p.rules:
            self.by_op[r.source.op].append(r)

    def entry(self, m_f, chi, f: str, i: int) -> NInfty:
        best: NInfty = 0
        for r in self.by_op[f]:
            best = max(best, rule_power(m_f, chi, r, r.source.vars[i - 1]))
        return best


def apply_m(p: Ptss, chi: Mapping[Tuple[str, int], int],
            state: Mapping[Tuple[str, int], NInfty]) -> Table:
    """One simultaneous application of the multiplicity function."""
    idx = _Index(p)
    return {(f, i): idx.entry(state, chi, f, i) for f, i in idx.unknowns}


def bottom(p: Ptss) -> Table:
    return {(f, i): 0 for f, n in p.signature.ops for i in range(1, n + 1)}


@dataclass(frozen=True)
class ExpansivityTable:
    omega: Dict[Tuple[str, int], NInfty]
    chi: Dict[Tuple[str, int], int]
    arities: Dict[str, int]
    converged: bool
    sweeps: int
    widened: Tuple[Tuple[str, int], ...] = ()

    def row(self, f: str) -> List[NInfty]:
        if f not in self.arities:
            raise KeyError(f)
        return [self.omega[(f, i)] for i in range(1, self.arities[f] + 1)]

    def omega_t(self, theta: Union[StateTerm, DistTerm], zeta: Variable) -> NInfty:
        """Weighted multiplicity of ``zeta`` in a term at the fixed point."""
        if isinstance(theta, (Var, App)):
            return weighted_multiplicity_state(self.omega, theta, zeta)
        return weighted_multiplicity_dist(self.omega, self.chi, theta, zeta)

    def to_json(self) -> dict:
        return {
            "operators": [{"name": f, "arity": n,
                           "omega": [render(v) for v in self.row(f)],
                           "chi": [self.chi[(f, i)] for i in range(1, n + 1)]}
                          for f, n in self.arities.items()],
            "sweeps": self.sweeps,
            "widened": [f"{f}:{i}" for f, i in self.widened],
        }


# -- detection of unbounded entries ----------------------------------------
#
# Truncation v -> min(v, C) commutes with +, *, max and with max against a
# constant <= C, so iterating with every new entry truncated at C yields
# exactly min(lfp, C).  With C = 2 this says which entries are 0, 1 or at
# least 2, which is enough to decide where a dependency cycle amplifies.

def _truncated_lfp(idx: "_Index", chi, cap: int) -> Table:
    m_f = {k: 0 for k in idx.unknowns}
    changed = True
    while changed:
        changed = False
        for k in idx.unknowns:
            new = min(idx.entry(m_f, chi, *k), cap)
            if new != m_f[k]:
                m_f[k] = new
                changed = True
    return m_f


# An abstract value is (v, sens): v = min(value at the fixed point, 2) and
# sens maps an unknown to 1 when some branch of the expression is >= that
# unknown, or to 2 when some branch is >= the unknown plus one.

def _a_add(a, b):
    (va, sa), (vb, sb) = a, b
    sens = {k: 2 if s == 2 or vb >= 1 else 1 for k, s in sa.items()}
    for k, s in sb.items():
        sens[k] = max(sens.get(k, 0), 2 if s == 2 or va >= 1 else 1)
    return min(va + vb, 2), sens


def _a_mul(a, b):
    (va, sa), (vb, sb) = a, b
    if va == 0 or vb == 0:
        return 0, {}
    sens = {k: 2 if s == 2 or vb >= 2 else 1 for k, s in sa.items()}
    for k, s in sb.items():
        sens[k] = max(sens.get(k, 0), 2 if s == 2 or va >= 2 else 1)
    return min(va * vb, 2), sens


def _a_max(a, b):
    (va, sa), (vb, sb) = a, b
    sens = dict(sa)
    for k, s in sb.items():
        sens[k] = max(sens.get(k, 0), s)
    return max(va, vb), sens


def _a_unknown(coarse, key, floor: int = 0):
    """An unknown, or max(unknown, floor) for the chi-weighted lift case."""
    v = coarse.get(key, 0)
    if v >= 1:
        return v, {key: 1}
    return floor, {}


def _a_state(coarse, t, zeta):
    if isinstance(t, Var):
        return (1 if isinstance(zeta, Var) and zeta.name == t.name else 0), {}
    total = (0, {})
    if isinstance(t, App):
        for i, a in enumerate(t.args, start=1):
            total = _a_add(total, _a_mul(_a_unknown(coarse, (t.op, i)),
                                         _a_state(coarse, a, zeta)))
    return total


def _a_dist(coarse, chi, theta, zeta):
    if isinstance(theta, DVar):
        return (1 if isinstance(zeta, DVar) and zeta.name == theta.name else 0), {}
    if isinstance(theta, Dirac):
        return _a_state(coarse, theta.term, zeta)
    if isinstance(theta, Convex):
        out = (0, {})
        for _, b in theta.parts:
            out = _a_max(out, _a_dist(coarse, chi, b, zeta))
        return out
    total = (0, {})
    for i, a in enumerate(theta.args, start=1):
        w = _a_unknown(coarse, (theta.op, i), chi.get((theta.op, i), 0))
        total = _a_add(total, _a_mul(w, _a_dist(coarse, chi, a, zeta)))
    return total


def _sensitivity(idx: "_Index", chi, coarse, f: str, i: int) -> Dict:
    out = (0, {})
    for r in idx.by_op[f]:
        x = Var(r.source.vars[i - 1])
        power = _a_dist(coarse, chi, r.target, x)
        for q in r.pos:
            power = _a_add(power, _a_mul(_a_state(coarse, q.lhs, x),
                                         _a_dist(coarse, chi, r.target, DVar(q.derivative))))
        out = _a_max(out, power)
    return out[1]


def unbounded_entries(p: Ptss) -> List[Tuple[str, int]]:
    """Entries whose least fixed point is infinite.

    At the fixed point an entry on a dependency cycle with a strict step
    satisfies v >= v + 1 or v >= 2v with v >= 1, so it is infinite, and so
    is every entry depending on it.  Conversely, if only non-strict cycles
    are reachable, each strongly connected group equals the maximum of its
    inputs from below and stays finite.
    """
    p = expand_ntmuxt(p)
    chi = discriminating_power(p)
    idx = _Index(p)
    coarse = _truncated_lfp(idx, chi, 2)
    edges = {k: _sensitivity(idx, chi, coarse, *k) for k in idx.unknowns}

    def reach(k):
        seen, todo = set(), [k]
        while todo:
            u = todo.pop()
            for v in edges[u]:
                if v not in seen:
                    seen.add(v)
                    todo.append(v)
        return seen

    reaches = {k: reach(k) for k in idx.unknowns}
    pumps = {u for u in idx.unknowns
             if any(s == 2 and u in reaches[v] for v, s in edges[u].items())}
    return [k for k in idx.unknowns if k in pumps or reaches[k] & pumps]


def lfp_expansivity(p: Ptss) -> ExpansivityTable:
    """Least fixed point by Gauss-Seidel Kleene iteration from zero.

    Entries found unbounded by ``unbounded_entries`` start at infinity;
    otherwise they would grow to astronomically large integers before the
    sweep count allows widening.  With n unknowns every finite entry is
    stable after n sweeps (an optimal derivation never needs to revisit an
    argument on one path), so an entry still growing in sweep n+1 or later
    is widened to infinity.  The result is re-checked against one
    simultaneous application.
    """
    p = expand_ntmuxt(p)
    chi = discriminating_power(p)
    idx = _Index(p)
    n = len(idx.unknowns)
    m_f: Table = bottom(p)
    widened: List[Tuple[str, int]] = unbounded_entries(p)
    for k in widened:
        m_f[k] = INF
    todo = [k for k in idx.unknowns if m_f[k] != INF]
    sweeps = 0
    while True:
        sweeps += 1
        changed = False
        for f, i in todo:
            old = m_f[(f, i)]
            new = idx.entry(m_f, chi, f, i)
            if new != old:
                changed = True
                if sweeps > n and new != INF:
                    new = INF
                    widened.append((f, i))
                m_f[(f, i)] = new
        if not changed:
            break
        if sweeps > 2 * n + 2:
            raise NotAFixpoint(f"no stabilisation after {sweeps} sweeps")
    if apply_m(p, chi, m_f) != m_f:
        raise NotAFixpoint("analyzer result is not a fixed point")
    return ExpansivityTable(dict(m_f), chi, dict(p.signature.ops), True, sweeps,
                            tuple(widened))


def expansivity_bound(table: ExpansivityTable, f: str,
                      eps: Sequence[Fraction]) -> Fraction:
    """1 - prod_i (1 - eps_i) ** omega(f, i), with (1-e)**inf = 0 for e > 0."""
    if f not in table.arities:
        raise UnknownOperator(f)
    if len(eps) != table.arities[f]:
        raise ValueError(f"{f} takes {table.arities[f]} arguments, got {len(eps)} distances")
    eps = [Fraction(e) for e in eps]
    for e in eps:
        if not 0 <= e <= 1:
            raise EpsOutOfRange(f"distance {e} outside [0, 1]")
    prod = Fraction(1)
    for w, e in zip(table.row(f), eps):
        if w == 0 or e == 0:
            continue
        if w == INF:
            return Fraction(1)
        prod *= (1 - e) ** int(w)
    return 1 - prod


def jacobi(p: Ptss, sweeps: int = 1000, cap: Optional[int] = None) -> Tuple[Table, bool]:
    """Plain simultaneous iteration from zero; returns the table and whether
    it reached a fixed point within ``sweeps`` steps.  Used as an oracle.

    With ``cap`` every entry is truncated at that value, which gives
    min(iterate, cap) exactly while keeping the integers small.
    """
    p = expand_ntmuxt(p)
    chi = discriminating_power(p)
    idx = _Index(p)
    m_f = bottom(p)
    clip = (lambda v: v) if cap is None else (lambda v: min(v, cap))
    for _ in range(sweeps):
        nxt = {(f, i): clip(idx.entry(m_f, chi, f, i)) for f, i in idx.unknowns}
        if nxt == m_f:
            return m_f, True
        m_f = nxt
    return m_f, False


def join(a: Mapping, b: Mapping) -> Table:
    return {k: max(a[k], b[k]) for k in a}


def meet(a: Mapping, b: Mapping) -> Table:
    return {k: min(a[k], b[k]) for k in a}


def leq(a: Mapping, b: Mapping) -> bool:
    return all(a[k] <= b[k] for k in a)
