from fractions import Fraction as F

import pytest

from ptss.expansivity import (
    INF, EpsOutOfRange, add, apply_m, bottom, expansivity_bound, jacobi, lfp_expansivity,
    mul, unbounded_entries, weighted_multiplicity_dist, weighted_multiplicity_state,
)
from ptss.formats import UnknownOperator, discriminating_power
from ptss.syntax import parse_spec
from ptss.terms import App, Convex, Dirac, DVar, Lift, Var

from conftest import load

x, mu = Var("x"), DVar("mu")


def test_arithmetic():
    assert mul(0, INF) == mul(INF, 0) == 0
    assert mul(3, INF) == mul(INF, INF) == INF
    assert add(INF, 0) == add(2, INF) == INF
    assert mul(10**400, INF) == INF          # no float overflow
    assert add(10**400, INF) == INF


def test_state_multiplicity():
    assert weighted_multiplicity_state({}, x, x) == 1
    assert weighted_multiplicity_state({("par", 1): 1, ("par", 2): 1}, App("par", (x, x)), x) == 2
    assert weighted_multiplicity_state({("g2", 1): 0, ("g2", 2): 0}, App("g2", (x, x)), x) == 0


def test_dist_multiplicity():
    assert weighted_multiplicity_dist({}, {}, mu, mu) == 1
    chi = {("g", 1): 1, ("g", 2): 1}
    assert weighted_multiplicity_dist({("g", 1): 0, ("g", 2): 0}, chi, Lift("g", (mu, mu)), mu) == 2
    mix = Convex(((F(1, 2), Lift("par", (mu, mu))), (F(1, 2), Dirac(App("s2")))))
    assert weighted_multiplicity_dist({("par", 1): 1, ("par", 2): 1}, {}, mix, mu) == 2


def test_apply_m_iterates_r2():
    p = load("r2")
    chi = discriminating_power(p)
    state = bottom(p)
    while True:
        nxt = apply_m(p, chi, state)
        if nxt == state:
            break
        state = nxt
    assert state[("g", 1)] == state[("g", 2)] == 1 and state[("f", 1)] == 2


def test_rule_less_operator_is_zero():
    p = load("r5")
    once = apply_m(p, discriminating_power(p), bottom(p))
    assert once[("g2", 1)] == once[("g2", 2)] == 0


@pytest.mark.parametrize("spec, expected", [
    ("r2", {("f", 1): 2, ("g", 1): 1, ("g", 2): 1}),
    ("r3", {("f", 1): 4, ("g", 1): 2, ("g", 2): 2,
            ("h", 1): 1, ("h", 2): 1, ("h", 3): 1, ("h", 4): 1}),
    ("r4", {("f", 1): INF}),
    ("r5", {("f", 1): 0, ("f2", 1): 0, ("g2", 1): 0, ("g2", 2): 0, ("g3", 1): 0, ("g3", 2): 0}),
    ("r6", {("f", 1): 2}),
    ("replication", {("bang", 1): INF, ("pbang", 1): INF}),
])
def test_lfp_corpus(spec, expected):
    table = lfp_expansivity(load(spec))
    assert {k: table.omega[k] for k in expected} == expected
    assert table.converged


def test_r6_chi_drives_omega():
    table = lfp_expansivity(load("r6"))
    assert table.chi[("g", 1)] == table.chi[("g", 2)] == 1
    assert table.omega[("g", 1)] == 0


def test_widened_entries_reported():
    table = lfp_expansivity(load("r4"))
    assert ("f", 1) in table.widened
    assert table.to_json()["widened"] == ["f:1"]
    assert unbounded_entries(load("r2")) == []


def test_nested_self_use_is_linear():
    p = parse_spec("op c/0, f/1; rule c : |- c -a-> delta(c);"
                   "rule f : x -a-> %m |- f(x) -a-> f(f(%m));")
    assert lfp_expansivity(p).omega[("f", 1)] == 1


def test_additive_cycle_is_unbounded():
    # f = f + 1 through g's second argument
    p = parse_spec("op c/0, f/1, g/2; rule c : |- c -a-> delta(c);"
                   "rule f : x -a-> %m |- f(x) -a-> g(f(%m),%m);"
                   "rule g : x1 -a-> %m1, x2 -a-> %m2 |- g(x1,x2) -a-> g(%m1,%m2);")
    table = lfp_expansivity(p)
    assert table.omega[("f", 1)] == INF and table.omega[("g", 1)] == 1


def test_unit_cycle_stays_finite():
    p = parse_spec("op c/0, f/1, g/1; rule c : |- c -a-> delta(c);"
                   "rule f : x -a-> %m |- f(x) -a-> g(%m);"
                   "rule g : x -a-> %m |- g(x) -a-> f(%m);")
    table = lfp_expansivity(p)
    assert table.omega[("f", 1)] == table.omega[("g", 1)] == 1 and not table.widened


def test_bound_examples():
    assert expansivity_bound(lfp_expansivity(load("r2")), "f", [F(1, 4)]) == F(7, 16)
    assert expansivity_bound(lfp_expansivity(load("r3")), "f", [F(1, 4)]) == F(175, 256)
    assert expansivity_bound(lfp_expansivity(load("r4")), "f", [F(1, 4)]) == 1
    assert expansivity_bound(lfp_expansivity(load("r4")), "f", [F(0)]) == 0
    assert expansivity_bound(lfp_expansivity(load("std_ops")), "seq", [F(1, 4), 0]) == F(1, 4)


def test_bound_errors():
    table = lfp_expansivity(load("r2"))
    with pytest.raises(UnknownOperator):
        expansivity_bound(table, "nope", [])
    with pytest.raises(ValueError):
        expansivity_bound(table, "f", [F(1, 4), F(1, 4)])
    with pytest.raises(EpsOutOfRange):
        expansivity_bound(table, "f", [F(5, 4)])


def test_jacobi_cap_is_exact_below_cap():
    p = load("r3")
    full, ok = jacobi(p)
    capped, ok2 = jacobi(p, cap=3)
    assert ok and ok2
    assert capped == {k: min(v, 3) for k, v in full.items()}


def test_table_json():
    doc = lfp_expansivity(load("r4")).to_json()
    f = next(op for op in doc["operators"] if op["name"] == "f")
    assert f == {"name": "f", "arity": 1, "omega": ["inf"], "chi": [1]}
