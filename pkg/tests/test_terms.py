from fractions import Fraction as F

import pytest

from ptss.terms import (
    App, Convex, Dirac, Distribution, DVar, Lift, OpenTerm, Substitution, Var,
    dist_mass, eval_dist, is_closed, mvar_dist, mvar_state, render_dist,
    render_state, substitute_dist, substitute_state,
)

r, s, nil = App("r"), App("s"), App("nil")
x, y = Var("x"), Var("y")
mu = DVar("mu")
pi_s = Distribution({s: F(3, 4), nil: F(1, 4)})


def test_substitute_state():
    assert substitute_state(x, Substitution({"x": r})) == r
    assert substitute_state(App("g", (x, x)), Substitution({"x": s})) == App("g", (s, s))
    assert substitute_state(App("f", (y,)), Substitution({"x": r})) == App("f", (y,))


def test_substitute_dist():
    assert substitute_dist(Dirac(x), Substitution({"x": r})) == Dirac(r)
    assert substitute_dist(mu, Substitution(dist={"mu": Dirac(r)})) == Dirac(r)
    lifted = substitute_dist(Lift("g", (mu, mu)), Substitution(dist={"mu": Dirac(s)}))
    assert lifted == Lift("g", (Dirac(s), Dirac(s)))


def test_mvar_state():
    assert mvar_state(x, x) == 1
    assert mvar_state(App("g", (x, x)), x) == 2
    assert mvar_state(r, x) == 0


def test_mvar_dist():
    assert mvar_dist(Lift("g", (mu, mu)), mu) == 2
    mix = Convex(((F(1, 2), Lift("par", (mu, mu))), (F(1, 2), Dirac(App("s2")))))
    assert mvar_dist(mix, mu) == 2
    assert mvar_dist(Dirac(x), mu) == 0


def test_eval_dist():
    assert eval_dist(Dirac(r)) == Distribution({r: 1})
    assert eval_dist(Convex(((F(1, 2), Dirac(r)), (F(1, 2), Dirac(r))))) == Distribution({r: 1})
    prod = eval_dist(Lift("g", (mu, mu)), {"mu": pi_s})
    assert dict(prod.items()) == {App("g", (s, s)): F(9, 16), App("g", (s, nil)): F(3, 16),
                                  App("g", (nil, s)): F(3, 16), App("g", (nil, nil)): F(1, 16)}


def test_eval_dist_open():
    with pytest.raises(OpenTerm):
        eval_dist(Dirac(x))
    with pytest.raises(OpenTerm):
        eval_dist(mu)


def test_dist_mass():
    assert dist_mass(Distribution({r: 1}), {r}) == 1
    assert dist_mass(pi_s, {nil}) == F(1, 4)
    assert dist_mass(pi_s, set()) == 0


def test_distribution_invariants():
    with pytest.raises(ValueError):
        Distribution({r: F(1, 2)})
    with pytest.raises(ValueError):
        Distribution({r: F(3, 2), s: F(-1, 2)})
    d = Distribution([(s, F(1, 2)), (r, F(1, 4)), (s, F(1, 4))])
    assert list(d) == [r, s] and d[s] == F(3, 4)
    assert hash(d) == hash(Distribution({s: F(3, 4), r: F(1, 4)}))


def test_convex_weights_checked():
    with pytest.raises(ValueError):
        Convex(((F(1, 2), Dirac(r)),))
    with pytest.raises(ValueError):
        Convex(((F(0), Dirac(r)), (F(1), Dirac(s))))


def test_render():
    assert render_state(App("g", (s, nil))) == "g(s,nil)"
    assert render_dist(Convex(((F(3, 4), Dirac(s)), (F(1, 4), Dirac(nil))))) == \
        "(3/4 * delta(s) (+) 1/4 * delta(nil))"
    assert render_dist(Lift("g", (mu, Dirac(x)))) == "g(%mu,delta(x))"


def test_is_closed():
    assert is_closed(App("g", (r, s)))
    assert not is_closed(App("g", (r, x)))
