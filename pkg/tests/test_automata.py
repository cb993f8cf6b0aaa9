import random

import pytest
from hypothesis import given

from conftest import all_traces, formulas, trace_batches
from neuralltlf.automata import (
    Dfa, accepts, characteristic_sample, dfa_equivalent, equivalent_formulas, formula_to_dfa,
    minimize, rpni,
)
from neuralltlf.generate import random_formula
from neuralltlf.ltl import TRUE, Trace, parse, satisfies, valuation


def test_eventually_two_states():
    d = formula_to_dfa(parse("F a"), ["a"])
    assert d.n_states == 2
    q0 = d.initial
    assert not d.accepting[q0]
    assert d.transitions[q0][0] == q0           # stay on !a
    sink = d.transitions[q0][1]
    assert d.accepting[sink] and d.transitions[sink] == (sink, sink)


def test_true_single_state():
    d = formula_to_dfa(TRUE, ["a"])
    assert d.n_states == 1 and d.accepting == (True,)


def test_until_three_states():
    assert formula_to_dfa(parse("a U b"), ["a", "b"]).n_states == 3


def test_next_needs_four_states():
    # start, "need a", accepting-with-continuation, and the rejecting sink
    assert formula_to_dfa(parse("X a"), ["a"]).n_states == 4


def test_dump_golden():
    d = formula_to_dfa(parse("F a"), ["a"])
    assert d.dump() == "state\t0\t1\tacc\n->0\t0\t1\t0\n1\t1\t1\t1"


def test_proposition_guard():
    props = [f"p{i}" for i in range(9)]
    with pytest.raises(ValueError):
        formula_to_dfa(parse("F p0"), props)


@pytest.mark.parametrize("text,props", [("F a", ["a"]), ("a U b", ["a", "b"]), ("G (a | X b)", ["a", "b"])])
def test_accepts_matches_satisfies(text, props):
    phi = parse(text)
    d = formula_to_dfa(phi, props)
    for pi in all_traces(props, 4):
        assert accepts(d, pi) == satisfies(phi, pi)


@given(formulas(("a", "b"), max_leaves=6))
def test_oracle_agreement_exhaustive(phi):
    props = ("a", "b")
    d = formula_to_dfa(phi, props)
    for X in trace_batches(props, 4):
        truth = valuation(phi, X, props)[:, 0]
        for steps, want in zip(X, truth):
            assert accepts(d, Trace.of(props, steps)) == bool(want)


def test_oracle_agreement_three_props():
    props = ("a", "b", "c")
    rng = random.Random(7)
    batches = trace_batches(props, 3)
    for _ in range(60):
        phi = random_formula(rng.randint(2, 8), props, qualitative=rng.random() < 0.5, seed=rng)
        d = formula_to_dfa(phi, props)
        for X in batches:
            truth = valuation(phi, X, props)[:, 0]
            got = [accepts(d, Trace.of(props, s)) for s in X]
            assert got == [bool(t) for t in truth]


# -- minimisation and equivalence ----------------------------------------------

def test_minimize_idempotent():
    d = formula_to_dfa(parse("a U (b & F a)"), ["a", "b"])
    assert minimize(d) == d


def test_minimize_merges_bisimilar_states():
    # states 1 and 2 both accept everything
    d = Dfa(("a",), ((1, 2), (1, 1), (2, 2)), (False, True, True))
    m = minimize(d)
    assert m.n_states == 1 and m.accepting == (True,)
    assert dfa_equivalent(d, m)


def test_minimize_single_state():
    d = Dfa(("a",), ((0, 0),), (False,))
    assert minimize(d) == d


def test_equivalence_reflexive_and_idempotence_law():
    d = formula_to_dfa(parse("F a"), ["a"])
    assert dfa_equivalent(d, d)
    assert equivalent_formulas(parse("F F a"), parse("F a"))


def test_until_vs_weak_until_counterexample():
    v = equivalent_formulas(parse("a U b"), parse("a W b"), ["a", "b"])
    assert not v
    # shortest witness: a single step with a and without b
    assert v.counterexample.steps == ((True, False),)
    assert satisfies(parse("a W b"), v.counterexample) != satisfies(parse("a U b"), v.counterexample)


@given(formulas(("a", "b"), max_leaves=4), formulas(("a", "b"), max_leaves=4))
def test_counterexamples_distinguish(phi, psi):
    v = equivalent_formulas(phi, psi, ["a", "b"])
    if not v:
        assert satisfies(phi, v.counterexample) != satisfies(psi, v.counterexample)
    else:
        for X in trace_batches(("a", "b"), 3):
            assert (valuation(phi, X, ("a", "b"))[:, 0] == valuation(psi, X, ("a", "b"))[:, 0]).all()


def test_alphabet_mismatch():
    with pytest.raises(ValueError):
        dfa_equivalent(formula_to_dfa(parse("F a"), ["a"]), formula_to_dfa(parse("F a"), ["a", "b"]))


# -- characteristic samples ----------------------------------------------------

def test_true_sample_all_positive():
    sample = characteristic_sample(formula_to_dfa(TRUE, ["a"]))
    assert all(lab for _, lab in sample)
    assert {t.steps for t, _ in sample if len(t) == 1} == {((False,),), ((True,),)}


def test_eventually_sample_has_both_witnesses():
    sample = characteristic_sample(formula_to_dfa(parse("F a"), ["a"]))
    assert any(lab and any(s[0] for s in t.steps) for t, lab in sample)
    assert any(not lab and not any(s[0] for s in t.steps) for t, lab in sample)
    assert all(len(t) >= 1 for t, _ in sample)


def test_sample_respects_max_length():
    d = formula_to_dfa(parse("X X X a"), ["a"])
    assert all(len(t) <= 2 for t, _ in characteristic_sample(d, max_length=2))


@pytest.mark.parametrize("seed", range(25))
def test_sample_labels_and_rpni_recovery(seed):
    props = ("a", "b", "c")
    phi = random_formula(2 + seed % 6, props, seed=seed)
    d = formula_to_dfa(phi, props)
    sample = characteristic_sample(d)
    for t, lab in sample:
        assert satisfies(phi, t) == lab
    assert dfa_equivalent(rpni(sample, props), d)
