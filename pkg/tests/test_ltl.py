import numpy as np
import pytest
from hypothesis import given

from conftest import all_traces, formulas, reference_eval, trace_batches, traces
from neuralltlf.automata import equivalent_formulas
from neuralltlf.ltl import (
    FALSE, TRUE, And, Eventually, Globally, LTLSyntaxError, Next, Not, Or, Prop, Release, Trace,
    Until, WeakNext, WeakUntil, evaluate, formula_size, is_nnf, is_qualitative, parse,
    satisfies, to_nnf, to_text, valuation,
)

a, b, c = Prop("a"), Prop("b"), Prop("c")


# -- parsing and printing ------------------------------------------------------

def test_parse_until():
    assert parse("a U b") == Until(a, b)


def test_parse_disjunction_with_release():
    phi = parse("b | G !a | (b R a)", ["a", "b"])
    assert phi == Or(Or(b, Globally(Not(a))), Release(b, a))


@pytest.mark.parametrize("text", ["a U", "(a", "a & & b", "U a", "a b", ""])
def test_syntax_errors(text):
    with pytest.raises(LTLSyntaxError):
        parse(text)


def test_syntax_error_has_position():
    with pytest.raises(LTLSyntaxError) as err:
        parse("a U")
    assert err.value.position == 3


def test_unknown_proposition():
    with pytest.raises(ValueError):
        parse("a U d", ["a", "b"])


def test_precedence_and_associativity():
    assert parse("a | b & c") == Or(a, And(b, c))
    assert parse("a U b U c") == Until(a, Until(b, c))
    assert parse("a & b U c") == And(a, Until(b, c))
    assert parse("!a U b") == Until(Not(a), b)
    assert parse("X WX a") == Next(WeakNext(a))
    assert parse("a W b R c") == WeakUntil(a, Release(b, c))


@given(formulas(("a", "b", "c"), max_leaves=8, constants=True))
def test_print_parse_round_trip(phi):
    assert parse(to_text(phi)) == phi


# -- size and fragments ---------------------------------------------------------

@pytest.mark.parametrize("text,size", [
    ("a U b", 3),
    ("b | G !a | (b R a)", 8),
    ("true", 0),
    ("!a", 1),
    ("X a", 2),
    ("!(a & b)", 3),
])
def test_formula_size(text, size):
    assert formula_size(parse(text)) == size


@pytest.mark.parametrize("text,qual", [("F a", True), ("X a", False), ("a U (b & WX c)", False),
                                       ("G (a R !b)", True)])
def test_is_qualitative(text, qual):
    assert is_qualitative(parse(text)) is qual


# -- semantics -----------------------------------------------------------------

def test_until_example():
    pi = Trace.of(["x1", "x2"], [(1, 0), (1, 0), (0, 1)])
    assert evaluate(parse("x1 U x2"), pi, 0)
    assert satisfies(parse("x1 U x2"), pi)


def test_next_at_end_of_trace():
    pi = Trace.of(["a"], [(1,)])
    assert not evaluate(Next(a), pi, 0)
    assert evaluate(WeakNext(a), pi, 0)


def test_constants():
    pi = Trace.of(["a"], [(0,), (1,)])
    assert satisfies(Globally(TRUE), pi)
    assert satisfies(TRUE, pi)
    assert not satisfies(FALSE, pi)


def test_out_of_range_timestep():
    pi = Trace.of(["a"], [(1,)])
    with pytest.raises(IndexError):
        evaluate(a, pi, 1)


def test_empty_trace_rejected():
    with pytest.raises(ValueError):
        Trace.of(["a"], [])


def test_weak_until_without_right_operand():
    pi = Trace.of(["a", "b"], [(1, 0)] * 3)
    assert not satisfies(Until(a, b), pi)
    assert satisfies(WeakUntil(a, b), pi)


@given(formulas(max_leaves=5), traces(max_len=5))
def test_valuation_matches_reference_semantics(phi, pi):
    v = valuation(phi, pi.array()[None], pi.props)[0]
    assert [bool(x) for x in v] == [reference_eval(phi, pi.steps, t) for t in range(len(pi))]


def test_derived_operator_identities_exhaustive():
    pairs = [
        (Eventually(a), Until(TRUE, a)),
        (Globally(a), Not(Eventually(Not(a)))),
        (WeakUntil(a, b), Or(Until(a, b), Globally(a))),
        (Release(a, b), Not(Until(Not(a), Not(b)))),
        (WeakNext(a), Not(Next(Not(a)))),
    ]
    for X in trace_batches(("a", "b"), 4):
        for lhs, rhs in pairs:
            np.testing.assert_array_equal(valuation(lhs, X, ("a", "b")), valuation(rhs, X, ("a", "b")))


# -- negation normal form -------------------------------------------------------

def test_nnf_examples():
    assert to_nnf(Not(Until(a, b))) == Release(Not(a), Not(b))
    assert to_nnf(Not(Not(a))) == a
    assert to_nnf(Not(Globally(And(a, b)))) == Eventually(Or(Not(a), Not(b)))
    assert to_nnf(Not(Next(a))) == WeakNext(Not(a))
    assert to_nnf(Not(WeakNext(a))) == Next(Not(a))


def test_nnf_dfa_oracle_example():
    phi = Not(Globally(And(a, b)))
    assert equivalent_formulas(phi, to_nnf(phi), ["a", "b"])


@given(formulas(("a", "b", "c"), max_leaves=6))
def test_nnf_is_nnf_and_equivalent(phi):
    psi = to_nnf(phi)
    assert is_nnf(psi)
    assert equivalent_formulas(phi, psi, ["a", "b", "c"])
