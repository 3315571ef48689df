import random
from fractions import Fraction as F

from hypothesis import given, settings
from hypothesis import strategies as st

import specgen
from oracles import (
    lift_oracle, naive_mvar_dist, naive_mvar_state, random_distribution, random_pair,
    random_pts, random_relation, random_state,
)
from ptss.bisim import (
    Relation, distance, greatest_epsilon_bisim, is_epsilon_bisim, lift_check, strict_bisim,
    verify_expansivity_bound,
)
from ptss.engine import reachable_fragment
from ptss.expansivity import (
    INF, ExpansivityTable, apply_m, expansivity_bound, join, leq, lfp_expansivity, meet,
)
from ptss.formats import check_entmuft_rule, check_entmuft_spec, discriminating_power
from ptss.syntax import FSource, Ptss, XSource, expand_ntmuxt, parse_spec, render_spec
from ptss.terms import (
    App, DVar, Substitution, Var, mvar_dist, mvar_state, substitute_dist, substitute_state,
)

seeds = st.integers(min_value=0, max_value=10**6)
eps_values = st.fractions(min_value=0, max_value=1, max_denominator=16)


def rules_of(seed):
    p = specgen.analysis_spec(seed)
    return p, [r for r in p.rules if isinstance(r.source, FSource)]


# -- terms ------------------------------------------------------------------

@given(seeds)
def test_substitution_composes(seed):
    rng = random.Random(seed)
    p, rules = rules_of(seed)
    if not rules:
        return
    rule = rng.choice(rules)
    ops = [(f, n) for f, n in p.signature.ops]
    closed = [App("k")] + [App(f, (App("k"),) * n) for f, n in ops if n]
    vars_ = sorted({v for r in rules for v in (r.source.vars or ())}) or ["x1"]
    s1 = Substitution({v: Var(rng.choice(vars_)) for v in vars_ if rng.random() < 0.7})
    s2 = Substitution({v: rng.choice(closed) for v in vars_})
    both = Substitution({**{v: substitute_state(t, s2) for v, t in s1.state.items()},
                         **{v: t for v, t in s2.state.items() if v not in s1.state}})
    lhs = rule.source_term
    assert substitute_state(substitute_state(lhs, s1), s2) == substitute_state(lhs, both)
    assert substitute_dist(substitute_dist(rule.target, s1), s2) == \
        substitute_dist(rule.target, both)


@given(seeds)
def test_mvar_matches_token_count(seed):
    _, rules = rules_of(seed)
    for r in rules:
        for x in r.source.vars:
            assert mvar_dist(r.target, Var(x)) == naive_mvar_dist(r.target, Var(x))
        for q in r.pos:
            for x in r.source.vars:
                assert mvar_state(q.lhs, Var(x)) == naive_mvar_state(q.lhs, Var(x))
            d = DVar(q.derivative)
            assert mvar_dist(r.target, d) == naive_mvar_dist(r.target, d)


# -- syntax -----------------------------------------------------------------

@given(seeds)
def test_parse_render_round_trip(seed):
    for p in (specgen.analysis_spec(seed), specgen.evaluable_spec(seed)):
        assert parse_spec(render_spec(p)) == p


@given(seeds)
def test_expansion_count(seed):
    p = specgen.analysis_spec(seed)
    n_x = sum(isinstance(r.source, XSource) for r in p.rules)
    q = expand_ntmuxt(p)
    assert len(q.rules) == len(p.rules) - n_x + n_x * len(p.signature)
    assert all(isinstance(r.source, FSource) for r in q.rules)


# -- formats ----------------------------------------------------------------

@given(seeds, seeds)
def test_chi_monotone_under_rule_addition(a, b):
    p, q = expand_ntmuxt(specgen.analysis_spec(a, max_ops=3)), \
        expand_ntmuxt(specgen.analysis_spec(b, max_ops=3))
    if p.signature != q.signature:
        return
    both = Ptss(p.signature, p.rules + tuple(r for r in q.rules if r.name not in
                                             {x.name for x in p.rules}))
    small, big = discriminating_power(p), discriminating_power(both)
    assert all(small[k] <= big[k] for k in small)


@given(seeds)
def test_format_check_is_local(seed):
    p = expand_ntmuxt(specgen.analysis_spec(seed))
    report = check_entmuft_spec(p)
    for r in p.rules:
        assert report.verdict(r.name) == check_entmuft_rule(r)[0]


@given(seeds)
def test_format_pass_bounds_omega(seed):
    p = expand_ntmuxt(specgen.analysis_spec(seed))
    passing = Ptss(p.signature, tuple(r for r in p.rules if check_entmuft_rule(r)[0]))
    table = lfp_expansivity(passing)
    assert all(v <= 1 for v in table.omega.values())


# -- analyzer -----------------------------------------------------------------

@given(seeds)
def test_apply_m_order_preserving(seed):
    rng = random.Random(seed)
    p = expand_ntmuxt(specgen.analysis_spec(seed))
    chi = discriminating_power(p)
    keys = [(f, i) for f, n in p.signature.ops for i in range(1, n + 1)]
    a, b = random_pair(rng, keys)
    assert leq(apply_m(p, chi, a), apply_m(p, chi, b))


@given(seeds)
def test_lfp_is_fixpoint(seed):
    p = specgen.analysis_spec(seed)
    table = lfp_expansivity(p)
    assert apply_m(expand_ntmuxt(p), table.chi, table.omega) == table.omega


@given(seeds)
def test_join_meet_are_bounds(seed):
    rng = random.Random(seed)
    keys = [("f", 1), ("f", 2), ("g", 1)]
    a, b, c = (random_state(rng, keys) for _ in range(3))
    j, m = join(a, b), meet(a, b)
    assert leq(a, j) and leq(b, j) and leq(m, a) and leq(m, b)
    if leq(a, c) and leq(b, c):
        assert leq(j, c)
    if leq(c, a) and leq(c, b):
        assert leq(c, m)


@given(st.lists(st.sampled_from([0, 1, 2, 3, INF]), min_size=1, max_size=3),
       st.data())
def test_bound_monotone(omega, data):
    n = len(omega)
    eps = data.draw(st.lists(eps_values, min_size=n, max_size=n))
    i = data.draw(st.integers(0, n - 1))
    bump = data.draw(eps_values)
    keys = {("f", k + 1): w for k, w in enumerate(omega)}
    table = ExpansivityTable(keys, {k: 0 for k in keys}, {"f": n}, True, 0)
    base = expansivity_bound(table, "f", eps)
    more_eps = list(eps)
    more_eps[i] = max(eps[i], bump)
    assert expansivity_bound(table, "f", more_eps) >= base
    bigger = dict(keys)
    bigger[("f", i + 1)] = INF if omega[i] == INF else omega[i] + 1
    assert expansivity_bound(ExpansivityTable(bigger, table.chi, {"f": n}, True, 0),
                             "f", eps) >= base
    assert 0 <= base <= 1


# -- bisimulation -------------------------------------------------------------

@given(seeds, eps_values)
def test_lift_check_matches_oracle(seed, eps):
    rng = random.Random(seed)
    states = [App(f"u{i}") for i in range(6)]
    pi, pi2 = random_distribution(rng, states), random_distribution(rng, states)
    rel = random_relation(rng, states)
    assert lift_check(pi, pi2, rel, eps) == lift_oracle(pi, pi2, rel, eps)


@given(seeds, eps_values, eps_values)
def test_gfp_monotone_and_sound(seed, e1, e2):
    lo, hi = min(e1, e2), max(e1, e2)
    pts = random_pts(random.Random(seed))
    small, big = greatest_epsilon_bisim(pts, lo), greatest_epsilon_bisim(pts, hi)
    assert small <= big
    assert is_epsilon_bisim(pts, small, lo) and is_epsilon_bisim(pts, big, hi)
    classes = strict_bisim(pts)
    strict = Relation([(a, b) for c in classes for a in c for b in c])
    assert is_epsilon_bisim(pts, strict, lo) and strict <= small


@settings(max_examples=40)
@given(seeds)
def test_strict_bisim_iff_distance_zero(seed):
    pts = random_pts(random.Random(seed), n=4)
    classes = strict_bisim(pts)
    block = {t: i for i, c in enumerate(classes) for t in c}
    for i, a in enumerate(pts.states):
        for b in pts.states[i + 1:]:
            assert (block[a] == block[b]) == (distance(pts, a, b).value == 0)


@settings(max_examples=40)
@given(seeds)
def test_distance_pseudometric(seed):
    pts = random_pts(random.Random(seed), n=4)
    a, b = pts.states[0], pts.states[1]
    d = distance(pts, a, b)
    assert 0 <= d.value <= 1 and d.value == distance(pts, b, a).value
    assert distance(pts, a, a).value == 0


@settings(max_examples=60)
@given(seeds)
def test_expansivity_bound_holds(seed):
    rng = random.Random(seed)
    p = specgen.evaluable_spec(seed)
    consts = specgen.constants_of(p)
    f, n = rng.choice(specgen.operators_of(p))
    pairs = [(rng.choice(consts), rng.choice(consts)) for _ in range(n)]
    rep = verify_expansivity_bound(p, f, pairs)
    assert rep.measured.mode == "exact" and rep.holds
