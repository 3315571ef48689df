import pytest

from ptss.syntax import (
    FSource, SpecError, XSource, classify_evaluable, expand_ntmuxt, parse_spec,
    parse_term, render_spec, validate_simple,
)
from ptss.terms import App, Dirac, Var

from conftest import CORPUS, load


def codes(text):
    with pytest.raises(SpecError) as err:
        parse_spec(text)
    return [d.code for d in err.value.diagnostics]


def test_r2_shape():
    p = load("r2")
    assert len(p.signature) == 5 and len(p.rules) == 4


def test_minimal_spec():
    p = parse_spec("op a/0; rule : |- a -tick-> delta(a);")
    assert len(p.signature) == 1 and len(p.rules) == 1
    r = p.rules[0]
    assert r.name == "r1" and not r.pos and r.target == Dirac(App("a"))


def test_lookahead_rejected():
    with pytest.raises(SpecError) as err:
        parse_spec("op f/1; rule : %m -a-> %n |- f(x) -a-> %n;")
    assert any("lookahead not in simple format" in d.message for d in err.value.diagnostics)


def test_validate_par_rule_clean():
    p = parse_spec("op par/2; rule par : x1 -a-> %m1, x2 -a-> %m2 |- par(x1,x2) -a-> par(%m1,%m2);")
    assert validate_simple(p.rules[0], p.signature) == []


def test_duplicate_derivative():
    assert "DUP_DERIVATIVE" in codes("op f/2; rule : x -a-> %m, y -b-> %m |- f(x,y) -a-> %m;")


def test_duplicate_source_var():
    assert "DUP_SOURCE_VAR" in codes("op f/2; rule : |- f(x,x) -a-> delta(x);")


def test_errors_located_and_collected():
    text = "op f/1;\nrule : |- f(x) -a-> g(%m);\nrule : |- f(x,y) -a-> delta(x);\n"
    with pytest.raises(SpecError) as err:
        parse_spec(text)
    diags = err.value.diagnostics
    assert {d.code for d in diags} >= {"UNKNOWN_OP", "ARITY"}
    assert sorted(d.line for d in diags) == [d.line for d in diags]
    assert all(d.line in (2, 3) for d in diags)


def test_syntax_error_recovers():
    text = "op a/0;\nrule : |- a -> delta(a);\nrule ok : |- a -b-> delta(a);\nrule : |- a -c-> ;"
    assert codes(text).count("SYNTAX") == 2


def test_expand_two_ops():
    p = parse_spec("op c/0, f/1; rule : x -a-> %m |- x -b-> %m;")
    q = expand_ntmuxt(p)
    assert [r.source for r in q.rules] == [FSource("c", ()), FSource("f", ("x1",))]
    assert q.rules[1].pos[0].lhs == App("f", (Var("x1"),))
    assert str(q.rules[1]) == "rule r1_f : f(x1) -a-> %m |- f(x1) -b-> %m;"


def test_expand_identity():
    p = load("r2")
    assert expand_ntmuxt(p) == p


def test_expand_constant_axiom():
    q = expand_ntmuxt(parse_spec("op c/0; rule : |- x -a-> delta(x);"))
    assert len(q.rules) == 1 and str(q.rules[0]) == "rule r1_c : |- c -a-> delta(c);"
    assert not any(isinstance(r.source, XSource) for r in q.rules)


def test_classify():
    assert classify_evaluable(load("r2")) == []
    assert classify_evaluable(load("footnote")) == []
    table1 = load("table1")
    assert not [d for d in classify_evaluable(table1) if d.code == "NEG_NONVAR"]
    assert classify_evaluable(table1) == []


def test_classify_flags_complex_negative():
    p = parse_spec("op f/1, g/1; rule : g(x) -a-/> |- f(x) -a-> delta(x);")
    assert [d.code for d in classify_evaluable(p)] == ["NEG_NONVAR"]


@pytest.mark.parametrize("path", sorted(CORPUS.glob("*.ptss")), ids=lambda p: p.stem)
def test_corpus_round_trip(path):
    p = parse_spec(path.read_text())
    assert parse_spec(render_spec(p)) == p


def test_parse_term():
    p = load("r2")
    assert parse_term("g(s,nil)", p.signature) == App("g", (App("s"), App("nil")))
    with pytest.raises(SpecError):
        parse_term("g(s)", p.signature)
    with pytest.raises(SpecError):
        parse_term("g(s,x)", p.signature)
