"""Command line front end: ``ptss check|analyze|pts|distance|verify SPEC``.

Exit status is 0 on success, 1 when ``--strict`` is given and a verdict
fails, 2 for bad input and 3 when an exploration budget was exhausted.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import List, Optional, Sequence

from .bisim import IncompleteFragment, SupportTooLarge, distance, verify_expansivity_bound
from .engine import Budget, BudgetExceeded, NotEvaluable, reachable_fragment
from .expansivity import EpsOutOfRange, NotAFixpoint, lfp_expansivity
from .formats import (
    NOT_GUARANTEED, UnknownOperator, check_entmuft_spec, check_requirement,
    parse_requirement,
)
from .syntax import Ptss, SpecError, expand_ntmuxt, parse_spec, parse_term
from .terms import App

EXIT_OK, EXIT_VERDICT, EXIT_INPUT, EXIT_BUDGET = 0, 1, 2, 3


class InputError(Exception):
    def __init__(self, message: str, diagnostics: Sequence = ()):
        super().__init__(message)
        self.diagnostics = list(diagnostics)


class Incomplete(Exception):
    """Raised after a report was produced for a fragment cut off by the budget."""

    def __init__(self, report: dict, message: str):
        super().__init__(message)
        self.report = report


def _read_spec(path: str) -> Ptss:
    p = Path(path)
    if not p.exists() and p.parts[:1] == ("corpus",):
        # fall back to the copy shipped inside the package
        shipped = resources.files("ptss").joinpath(*p.parts)
        if shipped.is_file():
            return _parse(shipped.read_text(encoding="utf-8"))
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as e:
        raise InputError(f"cannot read {path}: {e.strerror or e}") from None
    return _parse(text)


def _parse(text: str) -> Ptss:
    try:
        return parse_spec(text)
    except SpecError as e:
        raise InputError(f"{len(e.diagnostics)} error(s) in specification",
                         e.diagnostics) from None


def _term(p: Ptss, text: str) -> App:
    try:
        return parse_term(text.strip(), p.signature)
    except SpecError as e:
        raise InputError(f"bad term {text!r}", e.diagnostics) from None


def _budget(args) -> Budget:
    try:
        return Budget.from_env(max_states=args.max_states, max_depth=args.max_depth,
                               max_closure_iters=args.max_closure_iters)
    except ValueError as e:
        raise InputError(str(e)) from None


# -- commands ------------------------------------------------------------------

def cmd_check(args):
    p = _read_spec(args.spec)
    report = check_entmuft_spec(expand_ntmuxt(p))
    out = {"command": "check", "rules": report.to_json(), "entmuft": report.overall}
    lines = [f"{r['name']}: {'entmuft' if r['entmuft'] else 'not entmuft'}"
             + "".join(f"  [{v['var']} copied {v['sum']} > {v['limit']}]"
                       for v in r["violations"])
             for r in out["rules"]]
    lines.append(f"overall: {'entmuft' if report.overall else 'not entmuft'}")
    return out, lines, not report.overall


def cmd_analyze(args):
    p = _read_spec(args.spec)
    table = lfp_expansivity(p)
    out = {"command": "analyze", **table.to_json()}
    lines = [f"{op['name']}/{op['arity']}: omega={op['omega']} chi={op['chi']}"
             for op in out["operators"]]
    if table.widened:
        lines.append("widened to inf: " + ", ".join(out["widened"]))
    failed = False
    reqs = []
    for text in args.require or ():
        try:
            req = parse_requirement(text)
            verdicts = check_requirement(table.omega, table.arities, req)
        except (ValueError, UnknownOperator) as e:
            raise InputError(f"requirement {text!r}: {e}") from None
        reqs.append({"requirement": text, "verdicts": verdicts})
        failed |= NOT_GUARANTEED in verdicts.values()
        lines.append(f"{text}: " + ", ".join(f"{f}={v}" for f, v in verdicts.items()))
    out["requirements"] = reqs
    return out, lines, failed


def cmd_pts(args):
    p = _read_spec(args.spec)
    if not args.seed:
        raise InputError("pts needs at least one --seed term")
    seeds = [_term(p, s) for s in args.seed]
    budget = _budget(args)
    pts = reachable_fragment(p, seeds, budget)
    out = {"command": "pts", "budget": budget.to_json(), **pts.to_json()}
    lines = [f"{len(pts.states)} states"]
    for tr in out["transitions"]:
        dist = " + ".join(f"{d['p']}*{d['to']}" for d in tr["dist"])
        lines.append(f"{tr['from']} -{tr['action']}-> {dist}")
    cut = [s for s, ok in out["complete"].items() if not ok]
    if cut:
        lines.append("not explored within budget: " + ", ".join(cut))
        raise Incomplete((out, lines), f"{len(cut)} state(s) not explored within budget")
    return out, lines, False


def cmd_distance(args):
    p = _read_spec(args.spec)
    if not args.term or len(args.term) != 2:
        raise InputError("distance needs exactly two --term arguments")
    t, u = (_term(p, s) for s in args.term)
    budget = _budget(args)
    pts = reachable_fragment(p, [t, u], budget)
    res = distance(pts, t, u, args.mode, _tolerance(args))
    out = {"command": "distance", "budget": budget.to_json(), **res.to_json()}
    d = out["distance"]
    shown = d if isinstance(d, str) else f"[{d['lo']}, {d['hi']}]"
    left, right = out["t"], out["t'"]
    return out, [f"d({left}, {right}) = {shown} ({res.mode})"], False


def cmd_verify(args):
    p = _read_spec(args.spec)
    if not args.op:
        raise InputError("verify needs --op")
    pairs = []
    for text in args.pair or ():
        if text.count("|") != 1:
            raise InputError(f"pair {text!r} must have the form 't|t2'")
        a, b = text.split("|")
        pairs.append((_term(p, a), _term(p, b)))
    budget = _budget(args)
    rep = verify_expansivity_bound(p, args.op, pairs, budget, mode=args.mode)
    out = {"command": "verify", "budget": budget.to_json(), **rep.to_json()}
    lines = ["{} vs {}: {}".format(a["t"], a["t'"], a["distance"]) for a in out["args"]]
    lines += [f"omega({args.op}) = {out['omega']}"]
    if not rep.hypothesis:
        lines.append("some argument pair is unrelated at every eps; bound is trivial")
    lines += [f"bound = {out['bound']}",
              f"measured = {out['measured']} ({out['mode']})",
              f"holds = {str(out['holds']).lower()}, gap = {out['gap']}"]
    return out, lines, not rep.holds


def _tolerance(args) -> Fraction:
    try:
        tol = Fraction(args.tolerance)
    except (ValueError, ZeroDivisionError):
        raise InputError(f"bad tolerance {args.tolerance!r}") from None
    if tol <= 0:
        raise InputError("tolerance must be positive")
    return tol


COMMANDS = {"check": cmd_check, "analyze": cmd_analyze, "pts": cmd_pts,
            "distance": cmd_distance, "verify": cmd_verify}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ptss", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("spec", help="specification file (.ptss)")
    common.add_argument("--format", choices=("text", "json"), default="text")
    common.add_argument("--out", help="write the report to this file instead of stdout")
    common.add_argument("--strict", action="store_true",
                        help="exit 1 when a verdict fails")
    explore = argparse.ArgumentParser(add_help=False)
    explore.add_argument("--max-states", type=int)
    explore.add_argument("--max-depth", type=int)
    explore.add_argument("--max-closure-iters", type=int)
    measure = argparse.ArgumentParser(add_help=False)
    measure.add_argument("--mode", choices=("auto", "exact", "bracket"), default="auto")
    measure.add_argument("--tolerance", default="1/1000000",
                         help="bisection width in bracket mode")

    sub.add_parser("check", parents=[common], help="rule format verdicts")
    a = sub.add_parser("analyze", parents=[common], help="expansivity table")
    a.add_argument("--require", action="append", metavar="REQ",
                   help="non-expansive | p-norm=P | arg-independent=f:i")
    s = sub.add_parser("pts", parents=[common, explore], help="explore a fragment")
    s.add_argument("--seed", action="append", metavar="TERM")
    d = sub.add_parser("distance", parents=[common, explore, measure],
                       help="distance of two closed terms")
    d.add_argument("--term", action="append", metavar="TERM")
    v = sub.add_parser("verify", parents=[common, explore, measure],
                       help="measured distance against the expansivity bound")
    v.add_argument("--op")
    v.add_argument("--pair", action="append", metavar="T|T2")
    return ap


def _emit(args, report: dict, lines: List[str]) -> None:
    if args.format == "json":
        text = json.dumps(report, indent=2, ensure_ascii=False) + "\n"
    else:
        text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _error(args, kind: str, message: str, diagnostics=()) -> None:
    if getattr(args, "format", "text") == "json":
        err = {"error": {"kind": kind, "message": message,
                         "diagnostics": [d.to_json() for d in diagnostics]}}
        sys.stdout.write(json.dumps(err, indent=2, ensure_ascii=False) + "\n")
    else:
        for d in diagnostics:
            print(d, file=sys.stderr)
        print(f"ptss: {message}", file=sys.stderr)


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="ptss: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        report, lines, failed = COMMANDS[args.command](args)
    except InputError as e:
        _error(args, "input", str(e), e.diagnostics)
        return EXIT_INPUT
    except Incomplete as e:
        report, lines = e.report
        _emit(args, report, lines)
        return EXIT_BUDGET
    except (BudgetExceeded, IncompleteFragment) as e:
        _error(args, "budget", str(e))
        return EXIT_BUDGET
    except (NotEvaluable, UnknownOperator, SupportTooLarge, EpsOutOfRange,
            NotAFixpoint, ValueError) as e:
        msg = f"unknown operator {e.args[0]}" if isinstance(e, UnknownOperator) else str(e)
        _error(args, type(e).__name__, msg)
        return EXIT_INPUT
    _emit(args, report, lines)
    return EXIT_VERDICT if failed and args.strict else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
