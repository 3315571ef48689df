"""Approximate bisimulation on finite fragments.

A symmetric relation R is an eps-bisimulation when every move t -a-> pi of
a related state is answered by some t' -a-> pi' with
``pi(X) <= pi'(R(X)) + eps`` for every set X.  The largest such relation is
found by deleting violating pairs until nothing changes; the distance of two
states is the least eps at which they are related.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

from .engine import Budget, Engine, Pts, reachable_fragment
from .expansivity import ExpansivityTable, expansivity_bound, lfp_expansivity, render
from .syntax import Ptss
from .terms import App, Distribution, render_state, term_key

log = logging.getLogger(__name__)

MAX_LIFT_SUPPORT = 20
EXACT_MAX_CANDIDATES = 2_000_000
DEFAULT_TOLERANCE = Fraction(1, 10**6)


class SupportTooLarge(ValueError):
    pass


class IncompleteFragment(ValueError):
    pass


class Relation:
    """Symmetric relation over states; reflexive pairs are implicit."""

    __slots__ = ("pairs",)

    def __init__(self, pairs: Iterable[Iterable[App]] = ()):
        self.pairs: FrozenSet[FrozenSet[App]] = frozenset(
            frozenset(p) for p in pairs if len(frozenset(p)) == 2)

    def related(self, a: App, b: App) -> bool:
        return a == b or frozenset((a, b)) in self.pairs

    def image(self, xs: Iterable[App], universe: Iterable[App]) -> set:
        xs = set(xs)
        return {y for y in universe if y in xs or any(self.related(x, y) for x in xs)}

    def __contains__(self, pair) -> bool:
        a, b = pair
        return self.related(a, b)

    def __le__(self, other: "Relation") -> bool:
        return self.pairs <= other.pairs

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Relation) and self.pairs == other.pairs

    def __hash__(self) -> int:
        return hash(self.pairs)

    def __len__(self) -> int:
        return len(self.pairs)

    def sorted_pairs(self) -> List[Tuple[App, App]]:
        out = [tuple(sorted(p, key=term_key)) for p in self.pairs]
        return sorted(out, key=lambda ab: (term_key(ab[0]), term_key(ab[1])))

    def to_json(self, eps: Fraction) -> dict:
        return {"pairs": [[render_state(a), render_state(b)] for a, b in self.sorted_pairs()],
                "epsilon": str(Fraction(eps))}

    def __repr__(self) -> str:
        inner = ", ".join(f"({a}, {b})" for a, b in self.sorted_pairs())
        return f"Relation({{{inner}}})"


def _scaled(pi: Distribution, pi2: Distribution, eps: Fraction):
    den = math.lcm(*(p.denominator for p in (*pi.values(), *pi2.values())),
                   Fraction(eps).denominator)
    return ([int(p * den) for p in pi.values()], [int(p * den) for p in pi2.values()],
            int(Fraction(eps) * den))


def lift_check(pi: Distribution, pi2: Distribution, rel: Relation, eps: Fraction) -> bool:
    """True iff pi(X) <= pi2(R(X)) + eps for every X within the support of pi.

    Support points of ``pi`` with the same image under R are interchangeable
    for this test, so subsets are enumerated over groups of equal images.
    """
    xs, ys = list(pi), list(pi2)
    if len(xs) > MAX_LIFT_SUPPORT:
        raise SupportTooLarge(f"support of size {len(xs)} exceeds {MAX_LIFT_SUPPORT}")
    if eps >= 1:
        return True
    mx, my, e = _scaled(pi, pi2, eps)
    groups: Dict[int, int] = {}
    for x, m in zip(xs, mx):
        reach = sum(1 << j for j, y in enumerate(ys) if rel.related(x, y))
        groups[reach] = groups.get(reach, 0) + m
    return _lift_groups(tuple(sorted(groups.items())), tuple(my), e)


def _lift_groups(groups: Tuple[Tuple[int, int], ...], my: Tuple[int, ...], e: int) -> bool:
    masks = [g for g, _ in groups]
    mass_x = [m for _, m in groups]
    k = len(groups)
    mass = [0] * (1 << k)
    image = [0] * (1 << k)
    image_mass: Dict[int, int] = {0: 0}
    for sel in range(1, 1 << k):
        low = sel & -sel
        i = low.bit_length() - 1
        mass[sel] = mass[sel ^ low] + mass_x[i]
        im = image[sel] = image[sel ^ low] | masks[i]
        if im not in image_mass:
            image_mass[im] = sum(my[j] for j in range(len(my)) if im >> j & 1)
        if mass[sel] > image_mass[im] + e:
            return False
    return True


def _require_complete(pts: Pts) -> None:
    missing = [t for t in pts.states if not pts.complete.get(t, False)]
    if missing:
        shown = ", ".join(render_state(t) for t in missing[:5])
        raise IncompleteFragment(f"{len(missing)} state(s) not fully explored: {shown}")


def _answers(pts: Pts, t: App, u: App, rel: Relation, eps: Fraction) -> bool:
    for a, pi in pts.trans[t]:
        if not any(b == a and lift_check(pi, pi2, rel, eps) for b, pi2 in pts.trans[u]):
            return False
    return True


def greatest_epsilon_bisim(pts: Pts, eps: Fraction,
                           start: Optional[Relation] = None) -> Relation:
    """Largest eps-bisimulation on the fragment.

    ``start`` may give any relation known to contain the answer (for
    instance the result for a larger eps); refinement then begins there.
    """
    _require_complete(pts)
    eps = Fraction(eps)
    enabled = {t: frozenset(a for a, _ in pts.trans[t]) for t in pts.states}
    pairs = {frozenset((a, b)) for i, a in enumerate(pts.states)
             for b in pts.states[i + 1:] if enabled[a] == enabled[b]}
    if start is not None:
        pairs &= start.pairs
    changed = True
    while changed:
        changed = False
        rel = Relation(pairs)
        for pair in sorted(pairs, key=lambda p: sorted(map(term_key, p))):
            a, b = tuple(pair)
            if not (_answers(pts, a, b, rel, eps) and _answers(pts, b, a, rel, eps)):
                pairs.discard(pair)
                rel = Relation(pairs)
                changed = True
    return Relation(pairs)


def is_epsilon_bisim(pts: Pts, rel: Relation, eps: Fraction) -> bool:
    """Post-hoc check of the transfer condition for every related pair."""
    for pair in rel.pairs:
        a, b = tuple(pair)
        if not (_answers(pts, a, b, rel, eps) and _answers(pts, b, a, rel, eps)):
            return False
    return True


@dataclass(frozen=True)
class DistanceResult:
    t: App
    u: App
    lo: Fraction
    hi: Fraction
    mode: str                      # "exact" or "bracket"
    witness: Optional[Relation] = None

    @property
    def related(self) -> bool:
        """Whether the two states are eps-bisimilar for some eps <= 1; a
        distance of 1 alone does not tell."""
        return self.witness is not None

    @property
    def value(self) -> Fraction:
        if self.mode != "exact":
            raise ValueError("bracketed distance has no exact value")
        return self.hi

    def to_json(self) -> dict:
        dist = str(self.hi) if self.mode == "exact" else {"lo": str(self.lo), "hi": str(self.hi)}
        return {"t": render_state(self.t), "t'": render_state(self.u),
                "distance": dist, "mode": self.mode}


def _subset_sums(pi: Distribution) -> set:
    sums = {Fraction(0)}
    for p in pi.values():
        sums |= {s + p for s in sums}
    return sums


def candidate_epsilons(pts: Pts) -> Optional[List[Fraction]]:
    """Sorted thresholds at which the relation can change, or None when the
    fragment is too large for exact search."""
    dists = {pi for t in pts.states for _, pi in pts.trans[t]}
    if any(len(pi) > MAX_LIFT_SUPPORT for pi in dists):
        return None
    sums = set()
    for pi in dists:
        sums |= _subset_sums(pi)
    if len(sums) ** 2 > EXACT_MAX_CANDIDATES:
        return None
    cands = {Fraction(0), Fraction(1)}
    cands |= {min(max(a - b, Fraction(0)), Fraction(1)) for a in sums for b in sums}
    return sorted(cands)


def distance(pts: Pts, t: App, u: App, mode: str = "auto",
             tolerance: Fraction = DEFAULT_TOLERANCE) -> DistanceResult:
    """Approximate-bisimulation distance, exact over the candidate grid or
    bracketed by bisection (``mode`` is auto, exact or bracket)."""
    sub = pts.restrict([t, u])
    _require_complete(sub)
    if t == u:
        return DistanceResult(t, u, Fraction(0), Fraction(0), "exact", Relation())

    cache: Dict[Fraction, Relation] = {}

    def gfp(e: Fraction) -> Relation:
        if e not in cache:
            # the relation for the nearest larger eps contains the answer
            above = [k for k in cache if k > e]
            start = cache[min(above)] if above else None
            cache[e] = greatest_epsilon_bisim(sub, e, start)
        return cache[e]

    def holds(e: Fraction) -> bool:
        return gfp(e).related(t, u)

    cands = None if mode == "bracket" else candidate_epsilons(sub)
    if cands is None and mode == "exact":
        raise SupportTooLarge("fragment too large for exact distance search")
    if cands is None and mode == "auto":
        log.warning("falling back to bracket mode for %s vs %s",
                    render_state(t), render_state(u))
    try:
        if cands is not None:
            if not holds(Fraction(1)):
                return DistanceResult(t, u, Fraction(1), Fraction(1), "exact", None)
            lo, hi = 0, len(cands) - 1
            while lo < hi:
                mid = (lo + hi) // 2
                if holds(cands[mid]):
                    hi = mid
                else:
                    lo = mid + 1
            v = cands[lo]
            return DistanceResult(t, u, v, v, "exact", gfp(v))
    except SupportTooLarge:
        if mode == "exact":
            raise
        log.warning("support too large for exact search; bracketing")

    tolerance = Fraction(tolerance)
    if not holds(Fraction(1)):
        return DistanceResult(t, u, Fraction(1), Fraction(1), "bracket", None)
    if holds(Fraction(0)):
        return DistanceResult(t, u, Fraction(0), Fraction(0), "bracket", gfp(Fraction(0)))
    lo_e, hi_e = Fraction(0), Fraction(1)
    while hi_e - lo_e > tolerance:
        mid = (lo_e + hi_e) / 2
        if holds(mid):
            hi_e = mid
        else:
            lo_e = mid
    return DistanceResult(t, u, lo_e, hi_e, "bracket", gfp(hi_e))


def strict_bisim(pts: Pts) -> List[FrozenSet[App]]:
    """Probabilistic bisimilarity classes by partition refinement."""
    _require_complete(pts)
    block = {t: 0 for t in pts.states}
    while True:
        sigs = {}
        for t in pts.states:
            moves = set()
            for a, pi in pts.trans[t]:
                per_block: Dict[int, Fraction] = {}
                for s, p in pi.items():
                    per_block[block[s]] = per_block.get(block[s], Fraction(0)) + p
                moves.add((a, tuple(sorted(per_block.items()))))
            sigs[t] = (block[t], frozenset(moves))
        ids: Dict[tuple, int] = {}
        new_block = {}
        for t in pts.states:
            new_block[t] = ids.setdefault(sigs[t], len(ids))
        if len(ids) == len(set(block.values())):
            break
        block = new_block
    classes: Dict[int, list] = {}
    for t in pts.states:
        classes.setdefault(block[t], []).append(t)
    out = [frozenset(c) for c in classes.values()]
    return sorted(out, key=lambda c: min(term_key(t) for t in c))


@dataclass(frozen=True)
class VerifyReport:
    operator: str
    pairs: Tuple[Tuple[App, App], ...]
    omega: Tuple
    eps: Tuple[DistanceResult, ...]
    bound: Fraction
    measured: DistanceResult

    @property
    def hypothesis(self) -> bool:
        """Every argument pair is related at some eps; otherwise the bound
        formula does not apply and the trivial bound 1 is used."""
        return all(d.related for d in self.eps)

    @property
    def holds(self) -> bool:
        return self.measured.lo <= self.bound

    @property
    def gap(self) -> Fraction:
        return self.bound - self.measured.hi

    def to_json(self) -> dict:
        return {
            "operator": self.operator,
            "omega": [render(w) for w in self.omega],
            "args": [{"t": render_state(a), "t'": render_state(b),
                      "distance": d.to_json()["distance"]}
                     for (a, b), d in zip(self.pairs, self.eps)],
            "hypothesis": self.hypothesis,
            "bound": str(self.bound),
            "measured": self.measured.to_json()["distance"],
            "mode": self.measured.mode,
            "holds": self.holds,
            "gap": str(self.gap),
        }


def verify_expansivity_bound(p: Ptss, f: str, pairs: Sequence[Tuple[App, App]],
                             budget: Budget = Budget(),
                             table: Optional[ExpansivityTable] = None,
                             mode: str = "auto") -> VerifyReport:
    """Measure d(f(t..), f(t'..)) and compare it with the expansivity bound
    computed from the measured argument distances."""
    table = table or lfp_expansivity(p)
    if f not in table.arities:
        from .formats import UnknownOperator
        raise UnknownOperator(f)
    if len(pairs) != table.arities[f]:
        raise ValueError(f"{f} has arity {table.arities[f]}, got {len(pairs)} pairs")
    left = App(f, tuple(a for a, _ in pairs))
    right = App(f, tuple(b for _, b in pairs))
    seeds = [x for pair in pairs for x in pair] + [left, right]
    pts = reachable_fragment(p, seeds, budget)
    eps = tuple(distance(pts, a, b, mode) for a, b in pairs)
    # bracketed argument distances: the upper end keeps the bound sound
    bound = expansivity_bound(table, f, [d.hi for d in eps])
    if not all(d.related for d in eps):
        bound = Fraction(1)
    measured = distance(pts, left, right, mode)
    return VerifyReport(f, tuple(pairs), tuple(table.row(f)), eps, bound, measured)
