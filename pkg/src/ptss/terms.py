"""State terms, distribution terms, substitutions and exact distributions.

State terms are built from state variables and operator applications;
distribution terms add distribution variables, Dirac distributions, finite
convex combinations and operators lifted to distributions.  All values are
immutable and hashable.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Mapping, Tuple, Union


class OpenTerm(ValueError):
    """Raised when a closed term is required but a variable was found."""


@dataclass(frozen=True)
class Var:
    """State variable."""

    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class App:
    """Operator application ``op(args...)``; constants have no arguments."""

    op: str
    args: Tuple["StateTerm", ...] = ()
    _hash: int = field(default=0, init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not isinstance(self.args, tuple):
            object.__setattr__(self, "args", tuple(self.args))
        object.__setattr__(self, "_hash", hash((self.op, self.args)))

    def __hash__(self) -> int:
        return self._hash

    def __eq__(self, other: object) -> bool:
        if self is other:
            return True
        if not isinstance(other, App):
            return NotImplemented
        return (self._hash == other._hash and self.op == other.op
                and self.args == other.args)

    def __str__(self) -> str:
        return render_state(self)


StateTerm = Union[Var, App]


@dataclass(frozen=True)
class DVar:
    """Distribution variable, rendered with a ``%`` prefix."""

    name: str

    def __str__(self) -> str:
        return "%" + self.name


@dataclass(frozen=True)
class Dirac:
    term: StateTerm

    def __str__(self) -> str:
        return render_dist(self)


@dataclass(frozen=True)
class Convex:
    """Finite convex combination; weights are in (0, 1] and sum to one."""

    parts: Tuple[Tuple[Fraction, "DistTerm"], ...]

    def __post_init__(self) -> None:
        parts = tuple((Fraction(w), body) for w, body in self.parts)
        if not parts:
            raise ValueError("convex combination needs at least one part")
        for w, _ in parts:
            if not 0 < w <= 1:
                raise ValueError(f"convex weight {w} outside (0, 1]")
        if sum(w for w, _ in parts) != 1:
            raise ValueError("convex weights must sum to 1")
        object.__setattr__(self, "parts", parts)

    def __str__(self) -> str:
        return render_dist(self)


@dataclass(frozen=True)
class Lift:
    """Operator lifted to distributions: the product of its argument distributions."""

    op: str
    args: Tuple["DistTerm", ...] = ()

    def __post_init__(self) -> None:
        if not isinstance(self.args, tuple):
            object.__setattr__(self, "args", tuple(self.args))

    def __str__(self) -> str:
        return render_dist(self)


DistTerm = Union[DVar, Dirac, Convex, Lift]
Variable = Union[Var, DVar]


@dataclass(frozen=True)
class Substitution:
    """Maps state variables to state terms and distribution variables to
    distribution terms.  Unmapped variables are left in place."""

    state: Mapping[str, StateTerm] = field(default_factory=dict)
    dist: Mapping[str, DistTerm] = field(default_factory=dict)


# -- canonical order and rendering ------------------------------------------

def term_key(t: StateTerm) -> tuple:
    """Total order on state terms: operator name first, then arguments."""
    if isinstance(t, App):
        return (0, t.op, tuple(term_key(a) for a in t.args))
    return (1, t.name, ())


def render_state(t: StateTerm) -> str:
    if isinstance(t, Var):
        return t.name
    if isinstance(t, DVar):
        # only reachable for malformed premise left-hand sides
        return "%" + t.name
    if not t.args:
        return t.op
    return f"{t.op}({','.join(render_state(a) for a in t.args)})"


def render_weight(w: Fraction) -> str:
    return str(Fraction(w))


def render_dist(theta: DistTerm) -> str:
    if isinstance(theta, DVar):
        return "%" + theta.name
    if isinstance(theta, Dirac):
        return f"delta({render_state(theta.term)})"
    if isinstance(theta, Convex):
        inner = " (+) ".join(f"{render_weight(w)} * {render_dist(b)}"
                             for w, b in theta.parts)
        return f"({inner})"
    if not theta.args:
        return theta.op
    return f"{theta.op}({','.join(render_dist(a) for a in theta.args)})"


# -- structural helpers ------------------------------------------------------

def is_closed(t: StateTerm) -> bool:
    if isinstance(t, App):
        return all(is_closed(a) for a in t.args)
    return False


def depth(t: StateTerm) -> int:
    if isinstance(t, App):
        return 1 + max((depth(a) for a in t.args), default=0)
    return 0


def state_vars(t: StateTerm) -> Iterator[str]:
    """State variable names of ``t`` in left-to-right order, with repeats."""
    if isinstance(t, Var):
        yield t.name
    elif isinstance(t, App):
        for a in t.args:
            yield from state_vars(a)


def dist_vars(theta: DistTerm) -> Iterator[Variable]:
    """All variables (state and distribution) occurring in ``theta``."""
    if isinstance(theta, DVar):
        yield theta
    elif isinstance(theta, Dirac):
        for name in state_vars(theta.term):
            yield Var(name)
    elif isinstance(theta, Convex):
        for _, body in theta.parts:
            yield from dist_vars(body)
    else:
        for a in theta.args:
            yield from dist_vars(a)


def operators_state(t: StateTerm) -> Iterator[Tuple[str, int]]:
    if isinstance(t, App):
        yield t.op, len(t.args)
        for a in t.args:
            yield from operators_state(a)


def operators_dist(theta: DistTerm) -> Iterator[Tuple[str, int]]:
    if isinstance(theta, Dirac):
        yield from operators_state(theta.term)
    elif isinstance(theta, Convex):
        for _, body in theta.parts:
            yield from operators_dist(body)
    elif isinstance(theta, Lift):
        yield theta.op, len(theta.args)
        for a in theta.args:
            yield from operators_dist(a)


# -- substitution ------------------------------------------------------------

def substitute_state(t: StateTerm, sigma: Substitution) -> StateTerm:
    if isinstance(t, Var):
        return sigma.state.get(t.name, t)
    if isinstance(t, App):
        if not t.args:
            return t
        return App(t.op, tuple(substitute_state(a, sigma) for a in t.args))
    return t


def substitute_dist(theta: DistTerm, sigma: Substitution) -> DistTerm:
    if isinstance(theta, DVar):
        return sigma.dist.get(theta.name, theta)
    if isinstance(theta, Dirac):
        return Dirac(substitute_state(theta.term, sigma))
    if isinstance(theta, Convex):
        return Convex(tuple((w, substitute_dist(b, sigma)) for w, b in theta.parts))
    return Lift(theta.op, tuple(substitute_dist(a, sigma) for a in theta.args))


# -- occurrence counting -----------------------------------------------------

def mvar_state(t: StateTerm, x: Variable) -> int:
    """How often the state variable ``x`` occurs in ``t``."""
    if isinstance(x, DVar):
        return 0
    if isinstance(t, Var):
        return int(t.name == x.name)
    if isinstance(t, App):
        return sum(mvar_state(a, x) for a in t.args)
    return 0


def mvar_dist(theta: DistTerm, zeta: Variable) -> int:
    """Occurrences of ``zeta`` in ``theta``; convex combinations take the
    maximum over their parts, lifted operators sum over arguments."""
    if isinstance(theta, DVar):
        return int(isinstance(zeta, DVar) and zeta.name == theta.name)
    if isinstance(theta, Dirac):
        return mvar_state(theta.term, zeta)
    if isinstance(theta, Convex):
        return max(mvar_dist(b, zeta) for _, b in theta.parts)
    return sum(mvar_dist(a, zeta) for a in theta.args)


# -- distributions -----------------------------------------------------------

class Distribution(Mapping[App, Fraction]):
    """Finitely supported probability distribution over closed state terms.

    Masses are exact fractions summing to one; the support is stored in
    canonical term order so iteration and rendering are deterministic.
    """

    __slots__ = ("_items", "_index", "_hash")

    def __init__(self, mass: Union[Mapping[App, Fraction], Iterable[Tuple[App, Fraction]]]):
        pairs = mass.items() if isinstance(mass, Mapping) else mass
        merged: dict = {}
        for t, p in pairs:
            p = Fraction(p)
            if p < 0:
                raise ValueError(f"negative mass {p} for {t}")
            if p:
                merged[t] = merged.get(t, Fraction(0)) + p
        if not merged:
            raise ValueError("distribution has empty support")
        if sum(merged.values()) != 1:
            raise ValueError(f"masses sum to {sum(merged.values())}, not 1")
        self._items = tuple(sorted(merged.items(), key=lambda kv: term_key(kv[0])))
        self._index = dict(self._items)
        self._hash = hash(self._items)

    @classmethod
    def point(cls, t: App) -> "Distribution":
        return cls({t: Fraction(1)})

    def __getitem__(self, t: App) -> Fraction:
        return self._index[t]

    def __iter__(self) -> Iterator[App]:
        return (t for t, _ in self._items)

    def __len__(self) -> int:
        return len(self._items)

    def items(self):  # type: ignore[override]
        return self._items

    def __eq__(self, other: object) -> bool:
        if isinstance(other, Distribution):
            return self._hash == other._hash and self._items == other._items
        return NotImplemented

    def __hash__(self) -> int:
        return self._hash

    def key(self) -> tuple:
        return tuple((term_key(t), p) for t, p in self._items)

    def __repr__(self) -> str:
        inner = ", ".join(f"{t}: {p}" for t, p in self._items)
        return f"Distribution({{{inner}}})"


def dist_mass(pi: Mapping[App, Fraction], terms: Iterable[App]) -> Fraction:
    return sum((pi.get(t, Fraction(0)) for t in set(terms)), Fraction(0))


def eval_dist(theta: DistTerm,
              bound: Mapping[str, Distribution] | None = None) -> Distribution:
    """Evaluate a closed distribution term.

    ``bound`` optionally supplies values for distribution variables, which is
    how rule targets are instantiated with the distributions their premises
    matched.
    """
    bound = bound or {}
    if isinstance(theta, DVar):
        if theta.name in bound:
            return bound[theta.name]
        raise OpenTerm(f"unbound distribution variable %{theta.name}")
    if isinstance(theta, Dirac):
        if not is_closed(theta.term):
            raise OpenTerm(f"open Dirac body {render_state(theta.term)}")
        return Distribution.point(theta.term)
    if isinstance(theta, Convex):
        acc: dict = {}
        for w, body in theta.parts:
            for t, p in eval_dist(body, bound).items():
                acc[t] = acc.get(t, Fraction(0)) + w * p
        return Distribution(acc)
    args = [eval_dist(a, bound) for a in theta.args]
    acc = {}
    for combo in itertools.product(*(a.items() for a in args)):
        t = App(theta.op, tuple(s for s, _ in combo))
        p = Fraction(1)
        for _, q in combo:
            p *= q
        acc[t] = acc.get(t, Fraction(0)) + p
    return Distribution(acc)
