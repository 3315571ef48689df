"""Transitions of closed terms induced by an executable specification.

Evaluation is demand driven: a term's transitions are computed from the
rules of its head operator, evaluating premise left-hand sides recursively.
Positive cyclic dependencies are resolved as least fixed points by iterating
from the empty transition set.  Negative premises may only test source
variables; such a premise looks at a proper subterm, so term depth
stratifies the rules and the subterm's transition set is final before it is
consulted.
"""

from __future__ import annotations

import itertools
import math
import os
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

from .syntax import Ptss, Rule, XSource, classify_evaluable, expand_ntmuxt
from .terms import (
    App, Distribution, Substitution, eval_dist, is_closed, render_state,
    substitute_dist, substitute_state, term_key,
)

Transition = Tuple[str, Distribution]
EMPTY: FrozenSet[Transition] = frozenset()
# demand-driven recursion cap, kept well below the interpreter's stack limit
MAX_DEMAND_DEPTH = 200


class NotEvaluable(ValueError):
    pass


class BudgetExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class Budget:
    max_states: int = 4096
    max_depth: int = 64
    max_closure_iters: int = 64

    def __post_init__(self) -> None:
        for name in ("max_states", "max_depth", "max_closure_iters"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    @classmethod
    def from_env(cls, **overrides) -> "Budget":
        """Defaults, with ``PTSS_BUDGET_STATES`` overriding max_states."""
        kw = {}
        if os.environ.get("PTSS_BUDGET_STATES"):
            kw["max_states"] = int(os.environ["PTSS_BUDGET_STATES"])
        kw.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**kw)

    def to_json(self) -> dict:
        return {"max_states": self.max_states, "max_depth": self.max_depth,
                "max_closure_iters": self.max_closure_iters}


def match_rule(rule: Rule, t: App) -> Optional[Substitution]:
    src = rule.source
    if isinstance(src, XSource):
        raise ValueError("rule has a variable source")
    if t.op != src.op or len(t.args) != len(src.vars):
        return None
    return Substitution(state=dict(zip(src.vars, t.args)))


def sort_transitions(trans: Iterable[Transition]) -> Tuple[Transition, ...]:
    return tuple(sorted(trans, key=lambda tr: (tr[0], tr[1].key())))


class Engine:
    """One evaluation session over a specification, owning its memo table."""

    def __init__(self, p: Ptss, budget: Budget = Budget()):
        p = expand_ntmuxt(p)
        warnings = classify_evaluable(p)
        if warnings:
            raise NotEvaluable("; ".join(d.message for d in warnings))
        self.ptss = p
        self.budget = budget
        self.by_op: Dict[str, List[Rule]] = {f: [] for f in p.signature}
        for r in p.rules:
            self.by_op[r.source.op].append(r)
        self._final: Dict[App, FrozenSet[Transition]] = {}
        self._approx: Dict[App, FrozenSet[Transition]] = {}
        self._stack: Dict[App, int] = {}

    def derive(self, t: App) -> Tuple[FrozenSet[Transition], bool]:
        """All transitions of ``t`` and whether they were derived within budget."""
        if not is_closed(t):
            raise ValueError(f"{render_state(t)} is not closed")
        try:
            value, _ = self._eval(t)
        except BudgetExceeded:
            self._stack.clear()
            return self._approx.get(t, EMPTY), False
        return value, True

    def transitions(self, t: App) -> FrozenSet[Transition]:
        value, complete = self.derive(t)
        if not complete:
            raise BudgetExceeded(f"transitions of {render_state(t)} exceed the budget")
        return value

    def _eval(self, t: App) -> Tuple[FrozenSet[Transition], float]:
        """Returns the transition set and the lowest stack position of any
        in-progress term it depended on (inf when the result is final)."""
        if t in self._final:
            return self._final[t], math.inf
        if t in self._stack:
            return self._approx.get(t, EMPTY), self._stack[t]
        pos = len(self._stack)
        if pos >= MAX_DEMAND_DEPTH:
            raise BudgetExceeded(f"premise evaluation nested deeper than {MAX_DEMAND_DEPTH}")
        self._stack[t] = pos
        try:
            iters = 0
            while True:
                value, low = self._step(t)
                if value == self._approx.get(t, EMPTY) or low > pos:
                    self._approx[t] = value
                    break
                self._approx[t] = value
                iters += 1
                if iters > self.budget.max_closure_iters:
                    raise BudgetExceeded(f"closure of {render_state(t)} did not "
                                         f"stabilise in {iters} iterations")
        finally:
            del self._stack[t]
        if low >= pos:
            self._final[t] = value
            return value, math.inf
        return value, low

    def _step(self, t: App) -> Tuple[FrozenSet[Transition], float]:
        out = set()
        low = math.inf
        for rule in self.by_op.get(t.op, ()):
            sigma = match_rule(rule, t)
            if sigma is None:
                continue
            blocked = False
            for q in rule.neg:
                sub = substitute_state(q.lhs, sigma)
                trans, sub_low = self._eval(sub)
                if sub_low != math.inf:
                    raise NotEvaluable(f"negative premise on {render_state(sub)} depends "
                                       "on a cyclic evaluation; depth does not stratify it")
                if any(a == q.action for a, _ in trans):
                    blocked = True
                    break
            if blocked:
                continue
            options = []
            for q in rule.pos:
                trans, sub_low = self._eval(substitute_state(q.lhs, sigma))
                low = min(low, sub_low)
                opts = [pi for a, pi in trans if a == q.action]
                if not opts:
                    break
                options.append(sorted(opts, key=Distribution.key))
            else:
                target = substitute_dist(rule.target, sigma)
                names = [q.derivative for q in rule.pos]
                for combo in itertools.product(*options):
                    out.add((rule.action, eval_dist(target, dict(zip(names, combo)))))
        return frozenset(out), low


def derive_transitions(p: Ptss, t: App, budget: Budget = Budget()
                       ) -> Tuple[FrozenSet[Transition], bool]:
    return Engine(p, budget).derive(t)


@dataclass
class Pts:
    """A finite explored fragment of an induced transition system."""

    states: Tuple[App, ...]
    trans: Dict[App, Tuple[Transition, ...]]
    complete: Dict[App, bool]
    budget: Optional[Budget] = None

    @property
    def all_complete(self) -> bool:
        return all(self.complete.values())

    def successors(self, t: App) -> Iterable[App]:
        for _, pi in self.trans.get(t, ()):
            yield from pi

    def restrict(self, roots: Iterable[App]) -> "Pts":
        """The sub-fragment reachable from ``roots``."""
        seen = set()
        todo = [r for r in roots]
        for r in todo:
            if r not in self.complete:
                raise KeyError(f"{render_state(r)} is not in the fragment")
        while todo:
            t = todo.pop()
            if t in seen:
                continue
            seen.add(t)
            todo.extend(s for s in self.successors(t) if s not in seen)
        states = tuple(sorted(seen, key=term_key))
        return Pts(states, {t: self.trans.get(t, ()) for t in states},
                   {t: self.complete[t] for t in states}, self.budget)

    def to_json(self) -> dict:
        return {
            "states": [render_state(t) for t in self.states],
            "transitions": [
                {"from": render_state(t), "action": a,
                 "dist": [{"to": render_state(u), "p": str(p)} for u, p in pi.items()]}
                for t in self.states for a, pi in self.trans.get(t, ())],
            "complete": {render_state(t): self.complete[t] for t in self.states},
        }

    @classmethod
    def from_json(cls, data: dict) -> "Pts":
        from .syntax import parse_term

        cache: Dict[str, App] = {}

        def term(s: str) -> App:
            if s not in cache:
                cache[s] = parse_term(s)
            return cache[s]

        states = {term(s) for s in data["states"]}
        trans: Dict[App, list] = {t: [] for t in states}
        for tr in data.get("transitions", []):
            src = term(tr["from"])
            pi = Distribution({term(d["to"]): Fraction(d["p"]) for d in tr["dist"]})
            states.add(src)
            states.update(pi)
            trans.setdefault(src, []).append((tr["action"], pi))
        complete_raw = data.get("complete", {})
        ordered = tuple(sorted(states, key=term_key))
        return cls(ordered,
                   {t: sort_transitions(set(trans.get(t, ()))) for t in ordered},
                   {t: bool(complete_raw.get(render_state(t), True)) for t in ordered})


def reachable_fragment(p: Ptss, seeds: Iterable[App], budget: Budget = Budget(),
                       engine: Optional[Engine] = None) -> Pts:
    """Breadth-first exploration from ``seeds`` in canonical term order.

    A state is expanded when it lies less than ``max_depth`` steps from a
    seed and its new successors fit under ``max_states``; otherwise it stays
    in the fragment marked incomplete.
    """
    engine = engine or Engine(p, budget)
    seeds = sorted(set(seeds), key=term_key)
    depth = {s: 0 for s in seeds}
    queue = deque(seeds)
    trans: Dict[App, Tuple[Transition, ...]] = {}
    complete: Dict[App, bool] = {}
    while queue:
        t = queue.popleft()
        if depth[t] >= budget.max_depth:
            complete[t] = False
            continue
        found, ok = engine.derive(t)
        succ = sorted({u for _, pi in found for u in pi if u not in depth}, key=term_key)
        if len(depth) + len(succ) > budget.max_states:
            complete[t] = False
            continue
        trans[t] = sort_transitions(found)
        complete[t] = ok
        for u in succ:
            depth[u] = depth[t] + 1
            queue.append(u)
    states = tuple(sorted(depth, key=term_key))
    return Pts(states, {t: trans.get(t, ()) for t in states},
               {t: complete.get(t, False) for t in states}, budget)
