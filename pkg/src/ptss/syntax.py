"""The ``.ptss`` rule language.

A specification declares operators and lists SOS rules::

    # constants r, s and a unary operator f
    op r/0, s/0, nil/0, f/1, g/2;
    rule ar : |- r -a-> delta(r);
    rule as : |- s -a-> (3/4 * delta(s) (+) 1/4 * delta(nil));
    rule f  : x -a-> %m |- f(x) -a-> g(%m,%m);
    rule g  : x1 -a-> %m1, x2 -a-> %m2 |- g(x1,x2) -a-> g(%m1,%m2);

Identifiers declared with ``op`` are operators, ``%``-prefixed identifiers are
distribution variables and every other identifier in a rule is a state
variable.  Positive premises read ``t -a-> %m``, negative ones ``t -a-/>``.
Only the simple rule format is expressible: premises never test derivatives.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

from .terms import (
    App, Convex, Dirac, DistTerm, DVar, Lift, StateTerm, Substitution, Var,
    dist_vars, operators_dist, operators_state, render_dist, render_state,
    render_weight, state_vars, substitute_dist, substitute_state,
)

__all__ = [
    "Diagnostic", "SpecError", "Signature", "PosPremise", "NegPremise",
    "FSource", "XSource", "Rule", "Ptss", "parse_spec", "parse_term",
    "render_spec", "render_rule", "validate_simple", "expand_ntmuxt",
    "classify_evaluable",
]


@dataclass(frozen=True, order=True)
class Diagnostic:
    line: int
    col: int
    code: str
    severity: str = field(default="error", compare=False)
    message: str = field(default="", compare=False)

    def to_json(self) -> dict:
        return {"severity": self.severity, "code": self.code,
                "line": self.line, "col": self.col, "message": self.message}

    def __str__(self) -> str:
        return f"{self.line}:{self.col}: {self.severity} [{self.code}] {self.message}"


class SpecError(Exception):
    """Parsing or validation failed; ``diagnostics`` holds every finding."""

    def __init__(self, diagnostics: Sequence[Diagnostic]):
        self.diagnostics = sorted(diagnostics)
        super().__init__("\n".join(str(d) for d in self.diagnostics))


@dataclass(frozen=True)
class Signature:
    """Operator names with their arities, in declaration order."""

    ops: Tuple[Tuple[str, int], ...] = ()

    @classmethod
    def of(cls, arities: Union[Dict[str, int], Iterable[Tuple[str, int]]]) -> "Signature":
        items = arities.items() if isinstance(arities, dict) else arities
        return cls(tuple((name, int(n)) for name, n in items))

    def arity(self, op: str) -> int:
        for name, n in self.ops:
            if name == op:
                return n
        raise KeyError(op)

    def __contains__(self, op: object) -> bool:
        return any(name == op for name, _ in self.ops)

    def __iter__(self):
        return (name for name, _ in self.ops)

    def __len__(self) -> int:
        return len(self.ops)


@dataclass(frozen=True)
class PosPremise:
    lhs: StateTerm
    action: str
    derivative: str


@dataclass(frozen=True)
class NegPremise:
    lhs: StateTerm
    action: str


@dataclass(frozen=True)
class FSource:
    op: str
    vars: Tuple[str, ...] = ()


@dataclass(frozen=True)
class XSource:
    var: str


@dataclass(frozen=True)
class Rule:
    name: str
    pos: Tuple[PosPremise, ...]
    neg: Tuple[NegPremise, ...]
    source: Union[FSource, XSource]
    action: str
    target: DistTerm
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)

    @property
    def source_term(self) -> StateTerm:
        if isinstance(self.source, XSource):
            return Var(self.source.var)
        return App(self.source.op, tuple(Var(v) for v in self.source.vars))

    @property
    def bound(self) -> set:
        names = set(self.source.vars) if isinstance(self.source, FSource) else {self.source.var}
        return names | {"%" + p.derivative for p in self.pos}

    def __str__(self) -> str:
        return render_rule(self)


@dataclass(frozen=True)
class Ptss:
    signature: Signature
    rules: Tuple[Rule, ...]

    @property
    def actions(self) -> frozenset:
        acts = set()
        for r in self.rules:
            acts.add(r.action)
            acts.update(p.action for p in r.pos)
            acts.update(p.action for p in r.neg)
        return frozenset(acts)

    def rules_for(self, op: str) -> List[Rule]:
        return [r for r in self.rules
                if isinstance(r.source, FSource) and r.source.op == op]

    def rule(self, name: str) -> Rule:
        for r in self.rules:
            if r.name == name:
                return r
        raise KeyError(name)


# -- lexer -------------------------------------------------------------------

_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<num>\d+(?:\.\d+)?)
  | (?P<dvar>%[A-Za-z_][A-Za-z0-9_']*)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<punct>\(\+\)|\|-|->|-/>|[-(),;:/*])
""", re.VERBOSE)

KEYWORDS = frozenset({"op", "rule", "delta"})


@dataclass(frozen=True)
class Token:
    kind: str       # ident, dvar, num, punct, eof
    text: str
    line: int
    col: int


def tokenize(text: str) -> Tuple[List[Token], List[Diagnostic]]:
    tokens, diags = [], []
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            diags.append(Diagnostic(line, col, "LEX", "error",
                                    f"unexpected character {text[pos]!r}"))
            pos += 1
            continue
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind not in ("ws", "comment"):
            tokens.append(Token(kind, m.group(), line, col))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens, diags


class _Abort(Exception):
    pass


# -- parser ------------------------------------------------------------------

class _Parser:
    def __init__(self, tokens: List[Token], signature: Dict[str, int],
                 closed_terms: bool = False):
        self.toks = tokens
        self.i = 0
        self.sig = signature
        self.diags: List[Diagnostic] = []
        # closed-term mode: an unknown identifier is an error, not a variable
        self.closed_terms = closed_terms

    # token helpers
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, text: str) -> bool:
        return self.tok.kind in ("punct", "ident") and self.tok.text == text

    def advance(self) -> Token:
        t = self.tok
        if t.kind != "eof":
            self.i += 1
        return t

    def error(self, code: str, msg: str, tok: Optional[Token] = None,
              fatal: bool = True) -> None:
        tok = tok or self.tok
        self.diags.append(Diagnostic(tok.line, tok.col, code, "error", msg))
        if fatal:
            raise _Abort()

    def expect(self, text: str) -> Token:
        if not self.at(text):
            shown = self.tok.text or "end of input"
            self.error("SYNTAX", f"expected {text!r}, found {shown!r}")
        return self.advance()

    def ident(self, what: str) -> Token:
        if self.tok.kind != "ident" or self.tok.text in KEYWORDS:
            shown = self.tok.text or "end of input"
            self.error("SYNTAX", f"expected {what}, found {shown!r}")
        return self.advance()

    def skip_statement(self) -> None:
        while self.tok.kind != "eof" and not self.at(";"):
            self.advance()
        if self.at(";"):
            self.advance()

    # declarations
    def op_decl(self) -> List[Tuple[str, int, Token]]:
        self.expect("op")
        out = []
        while True:
            name = self.ident("operator name")
            self.expect("/")
            if self.tok.kind != "num" or "." in self.tok.text:
                self.error("SYNTAX", "expected a natural-number arity")
            out.append((name.text, int(self.advance().text), name))
            if not self.at(","):
                break
            self.advance()
        self.expect(";")
        return out

    # terms
    def check_arity(self, op: str, n: int, tok: Token) -> None:
        if op not in self.sig:
            self.error("UNKNOWN_OP", f"unknown operator {op!r}", tok, fatal=False)
        elif self.sig[op] != n:
            self.error("ARITY", f"operator {op!r} has arity {self.sig[op]}, "
                       f"used with {n} argument(s)", tok, fatal=False)

    def state_term(self, allow_dvar: bool = False) -> StateTerm:
        tok = self.tok
        if tok.kind == "dvar":
            self.advance()
            if not allow_dvar:
                self.error("SYNTAX", "distribution variable inside a state term", tok)
            # kept so validation can report the lookahead
            return DVar(tok.text[1:])  # type: ignore[return-value]
        name = self.ident("state term")
        if self.at("("):
            self.advance()
            args = [] if self.at(")") else self.state_args(allow_dvar)
            self.expect(")")
            self.check_arity(name.text, len(args), name)
            return App(name.text, tuple(args))
        if name.text in self.sig:
            self.check_arity(name.text, 0, name)
            return App(name.text)
        if self.closed_terms:
            self.error("UNKNOWN_OP", f"unknown operator {name.text!r}", name)
        return Var(name.text)

    def state_args(self, allow_dvar: bool) -> List[StateTerm]:
        args = [self.state_term(allow_dvar)]
        while self.at(","):
            self.advance()
            args.append(self.state_term(allow_dvar))
        return args

    def weight(self) -> Fraction:
        tok = self.tok
        if tok.kind != "num":
            self.error("SYNTAX", f"expected a probability, found {tok.text!r}")
        self.advance()
        w = Fraction(tok.text)
        if self.at("/"):
            self.advance()
            if self.tok.kind != "num" or "." in self.tok.text:
                self.error("SYNTAX", "expected an integer denominator")
            den = int(self.advance().text)
            if "." in tok.text or den == 0:
                self.error("SYNTAX", "probability fractions are p/q with integers p, q > 0", tok)
            w = w / den
        return w

    def dist_term(self) -> DistTerm:
        tok = self.tok
        if tok.kind == "dvar":
            self.advance()
            return DVar(tok.text[1:])
        if self.at("("):
            return self.convex()
        if self.at("delta"):
            self.advance()
            self.expect("(")
            t = self.state_term()
            self.expect(")")
            return Dirac(t)
        name = self.ident("distribution term")
        if self.at("("):
            self.advance()
            args = [] if self.at(")") else self.dist_args()
            self.expect(")")
            self.check_arity(name.text, len(args), name)
            return Lift(name.text, tuple(args))
        if name.text in self.sig:
            self.check_arity(name.text, 0, name)
            return Lift(name.text)
        self.error("SYNTAX", f"state variable {name.text!r} where a distribution "
                   f"term is expected (write delta({name.text}))", name)
        raise AssertionError  # unreachable

    def dist_args(self) -> List[DistTerm]:
        args = [self.dist_term()]
        while self.at(","):
            self.advance()
            args.append(self.dist_term())
        return args

    def convex(self) -> DistTerm:
        open_tok = self.expect("(")
        parts = []
        while True:
            w = self.weight()
            self.expect("*")
            parts.append((w, self.dist_term()))
            if not self.at("(+)"):
                break
            self.advance()
        self.expect(")")
        if any(not 0 < w <= 1 for w, _ in parts) or sum(w for w, _ in parts) != 1:
            self.error("BAD_WEIGHTS", "convex weights must lie in (0,1] and sum to 1",
                       open_tok)
        return Convex(tuple(parts))

    # rules
    def premise(self, pos: list, neg: list) -> None:
        lhs = self.state_term(allow_dvar=True)
        self.expect("-")
        act = self.ident("action label")
        if self.at("-/>"):
            self.advance()
            neg.append(NegPremise(lhs, act.text))
        else:
            self.expect("->")
            if self.tok.kind != "dvar":
                self.error("SYNTAX", "positive premise must bind a distribution "
                           "variable (%name)")
            pos.append(PosPremise(lhs, act.text, self.advance().text[1:]))

    def source(self) -> Union[FSource, XSource]:
        name = self.ident("conclusion source")
        if name.text not in self.sig:
            if self.at("("):
                self.error("UNKNOWN_OP", f"unknown operator {name.text!r}", name)
            return XSource(name.text)
        xs = []
        if self.at("("):
            self.advance()
            if not self.at(")"):
                while True:
                    v = self.ident("source variable")
                    if v.text in self.sig:
                        self.error("SYNTAX", "source arguments must be variables", v)
                    xs.append(v.text)
                    if not self.at(","):
                        break
                    self.advance()
            self.expect(")")
        self.check_arity(name.text, len(xs), name)
        return FSource(name.text, tuple(xs))

    def rule(self, index: int) -> Rule:
        start = self.expect("rule")
        name = f"r{index}"
        if not self.at(":"):
            name = self.ident("rule name").text
        self.expect(":")
        pos: list = []
        neg: list = []
        if not self.at("|-"):
            self.premise(pos, neg)
            while self.at(","):
                self.advance()
                self.premise(pos, neg)
        self.expect("|-")
        src = self.source()
        self.expect("-")
        act = self.ident("action label")
        self.expect("->")
        target = self.dist_term()
        self.expect(";")
        return Rule(name, tuple(pos), tuple(neg), src, act.text, target,
                    start.line, start.col)


def _collect_signature(tokens: List[Token]) -> Tuple[Dict[str, int], List[Diagnostic]]:
    sig: Dict[str, int] = {}
    diags: List[Diagnostic] = []
    p = _Parser(tokens, {})
    while p.tok.kind != "eof":
        if p.at("op"):
            try:
                for name, n, tok in p.op_decl():
                    if name in sig and sig[name] != n:
                        diags.append(Diagnostic(tok.line, tok.col, "DUP_OP", "error",
                                                f"operator {name!r} redeclared with "
                                                f"arity {n} (was {sig[name]})"))
                    sig.setdefault(name, n)
            except _Abort:
                p.skip_statement()
        else:
            p.skip_statement()
    return sig, diags + p.diags


def parse_spec(text: str) -> Ptss:
    """Parse and validate a ``.ptss`` text.

    Raises SpecError listing every error found; statements are resynchronised
    at ``;`` so several errors can be reported at once.
    """
    tokens, diags = tokenize(text)
    sig, sig_diags = _collect_signature(tokens)
    diags += sig_diags
    signature = Signature.of(sig)
    p = _Parser(tokens, sig)
    rules: List[Rule] = []
    while p.tok.kind != "eof":
        try:
            if p.at("op"):
                p.op_decl()
            elif p.at("rule"):
                rules.append(p.rule(len(rules) + 1))
            else:
                p.error("SYNTAX", f"expected 'op' or 'rule', found {p.tok.text!r}")
        except _Abort:
            p.skip_statement()
    diags += p.diags
    seen = set()
    for r in rules:
        if r.name in seen:
            diags.append(Diagnostic(r.line, r.col, "DUP_RULE", "error",
                                    f"duplicate rule name {r.name!r}"))
        seen.add(r.name)
        # the parser already located arity and unknown-operator errors
        diags += [d for d in validate_simple(r, signature)
                  if d.code not in ("ARITY", "UNKNOWN_OP")]
    errors = [d for d in diags if d.severity == "error"]
    if errors:
        raise SpecError(_dedupe(diags))
    return Ptss(signature, tuple(rules))


def _dedupe(diags: Iterable[Diagnostic]) -> List[Diagnostic]:
    out, seen = [], set()
    for d in sorted(diags):
        k = (d.line, d.col, d.code, d.message)
        if k not in seen:
            seen.add(k)
            out.append(d)
    return out


def parse_term(text: str, signature: Optional[Signature] = None) -> App:
    """Parse a closed state term such as ``g(s,nil)``.

    Without a signature every identifier is taken to be an operator and
    arities are inferred from use.
    """
    tokens, diags = tokenize(text)
    if diags:
        raise SpecError(diags)
    if signature is None:
        return _parse_free_term(tokens)
    p = _Parser(tokens, dict(signature.ops), closed_terms=True)
    try:
        t = p.state_term()
        if p.tok.kind != "eof":
            p.error("SYNTAX", f"trailing input {p.tok.text!r}")
    except _Abort:
        pass
    if p.diags:
        raise SpecError(p.diags)
    return t  # type: ignore[return-value]


def _parse_free_term(tokens: List[Token]) -> App:
    pos = 0

    def term() -> App:
        nonlocal pos
        tok = tokens[pos]
        if tok.kind != "ident":
            raise SpecError([Diagnostic(tok.line, tok.col, "SYNTAX", "error",
                                        f"expected a term, found {tok.text!r}")])
        pos += 1
        args = []
        if tokens[pos].text == "(":
            pos += 1
            if tokens[pos].text != ")":
                args.append(term())
                while tokens[pos].text == ",":
                    pos += 1
                    args.append(term())
            if tokens[pos].text != ")":
                t = tokens[pos]
                raise SpecError([Diagnostic(t.line, t.col, "SYNTAX", "error", "expected ')'")])
            pos += 1
        return App(tok.text, tuple(args))

    t = term()
    if tokens[pos].kind != "eof":
        tok = tokens[pos]
        raise SpecError([Diagnostic(tok.line, tok.col, "SYNTAX", "error",
                                    f"trailing input {tok.text!r}")])
    return t


# -- rendering ---------------------------------------------------------------

def render_rule(rule: Rule) -> str:
    prems = [f"{render_state(p.lhs)} -{p.action}-> %{p.derivative}" for p in rule.pos]
    prems += [f"{render_state(p.lhs)} -{p.action}-/>" for p in rule.neg]
    head = f"rule {rule.name} : "
    body = (", ".join(prems) + " ") if prems else ""
    return (f"{head}{body}|- {render_state(rule.source_term)} -{rule.action}-> "
            f"{render_dist(rule.target)};")


def render_spec(p: Ptss) -> str:
    lines = []
    if p.signature.ops:
        lines.append("op " + ", ".join(f"{n}/{a}" for n, a in p.signature.ops) + ";")
    lines += [render_rule(r) for r in p.rules]
    return "\n".join(lines) + "\n"


# -- validation --------------------------------------------------------------

def validate_simple(rule: Rule, sig: Signature) -> List[Diagnostic]:
    """Check the simple-rule constraints: distinct derivatives, distinct source
    variables, arities, and no distribution variables on premise left-hand
    sides."""
    out: List[Diagnostic] = []

    def diag(code: str, msg: str) -> None:
        out.append(Diagnostic(rule.line, rule.col, code, "error",
                              f"rule {rule.name}: {msg}"))

    derivs = [p.derivative for p in rule.pos]
    for d in sorted({d for d in derivs if derivs.count(d) > 1}):
        diag("DUP_DERIVATIVE", f"derivative %{d} bound by more than one premise")
    if isinstance(rule.source, FSource):
        xs = rule.source.vars
        for x in sorted({x for x in xs if xs.count(x) > 1}):
            diag("DUP_SOURCE_VAR", f"source variable {x} repeated")

    used = []
    for p in (*rule.pos, *rule.neg):
        if _has_dvar(p.lhs):
            diag("LOOKAHEAD", f"premise {render_state(p.lhs)} -{p.action}-> tests a "
                 "distribution variable: lookahead not in simple format")
        else:
            used += list(operators_state(p.lhs))
    if isinstance(rule.source, FSource):
        used.append((rule.source.op, len(rule.source.vars)))
    used += list(operators_dist(rule.target))
    for op, n in sorted(set(used)):
        if op not in sig:
            diag("UNKNOWN_OP", f"unknown operator {op!r}")
        elif sig.arity(op) != n:
            diag("ARITY", f"operator {op!r} has arity {sig.arity(op)}, used with {n}")
    return out


def _has_dvar(t) -> bool:
    if isinstance(t, DVar):
        return True
    if isinstance(t, App):
        return any(_has_dvar(a) for a in t.args)
    return False


# -- ntmuxt expansion --------------------------------------------------------

def _fresh(base: str, taken: set, count: int) -> List[str]:
    out, k = [], 1
    while len(out) < count:
        cand = f"{base}{k}"
        if cand not in taken:
            out.append(cand)
            taken.add(cand)
        k += 1
    return out


def _rule_state_vars(rule: Rule) -> set:
    names = set()
    for p in (*rule.pos, *rule.neg):
        names.update(state_vars(p.lhs))
    names.update(v.name for v in dist_vars(rule.target) if isinstance(v, Var))
    if isinstance(rule.source, XSource):
        names.add(rule.source.var)
    return names


def expand_ntmuxt(p: Ptss) -> Ptss:
    """Replace each rule with a variable source ``x`` by one rule per operator
    ``f``, substituting ``f(x1,...,xn)`` (fresh variables) for ``x``."""
    if not any(isinstance(r.source, XSource) for r in p.rules):
        return p
    names = {r.name for r in p.rules}
    out: List[Rule] = []
    for r in p.rules:
        if isinstance(r.source, FSource):
            out.append(r)
            continue
        x = r.source.var
        for op, n in p.signature.ops:
            taken = _rule_state_vars(r)
            xs = _fresh(x, taken, n)
            sigma = Substitution(state={x: App(op, tuple(Var(v) for v in xs))})
            name = f"{r.name}_{op}"
            while name in names:
                name += "_"
            names.add(name)
            out.append(Rule(
                name,
                tuple(PosPremise(substitute_state(q.lhs, sigma), q.action, q.derivative)
                      for q in r.pos),
                tuple(NegPremise(substitute_state(q.lhs, sigma), q.action) for q in r.neg),
                FSource(op, tuple(xs)), r.action, substitute_dist(r.target, sigma),
                r.line, r.col))
    return Ptss(p.signature, tuple(out))


def classify_evaluable(p: Ptss) -> List[Diagnostic]:
    """Warnings for rules the semantics engine cannot execute.

    NEG_NONVAR: a negative premise tests something other than a bare source
    variable.  FREE_VAR: a premise or the target mentions a variable that is
    neither a source variable nor a bound derivative.  XSOURCE: the rule still
    has a variable source (expand first).
    """
    out: List[Diagnostic] = []
    for r in p.rules:
        def warn(code: str, msg: str) -> None:
            out.append(Diagnostic(r.line, r.col, code, "warning", f"rule {r.name}: {msg}"))

        if isinstance(r.source, XSource):
            warn("XSOURCE", "variable source; expand to operator sources first")
            continue
        src = set(r.source.vars)
        derivs = {q.derivative for q in r.pos}
        for q in r.neg:
            if not (isinstance(q.lhs, Var) and q.lhs.name in src):
                warn("NEG_NONVAR", f"negative premise on {render_state(q.lhs)} "
                     "is not a source variable")
        free = set()
        for q in (*r.pos, *r.neg):
            free.update(v for v in state_vars(q.lhs) if v not in src)
        for v in dist_vars(r.target):
            if isinstance(v, Var) and v.name not in src:
                free.add(v.name)
            elif isinstance(v, DVar) and v.name not in derivs:
                free.add("%" + v.name)
        for v in sorted(free):
            warn("FREE_VAR", f"free variable {v}")
    return sorted(out)
