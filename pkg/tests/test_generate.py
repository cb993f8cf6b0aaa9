import itertools
from collections import Counter

import pytest
from hypothesis import given
from hypothesis import strategies as st

from neuralltlf.generate import count_formulas, random_formula, random_formulas
from neuralltlf.ltl import (
    And, Eventually, Globally, Not, Or, Prop, Release, Until, WeakUntil, formula_size,
    has_temporal, is_nnf, is_qualitative, parse, to_text,
)

P = ("a", "b", "c")


def brute_force(size, props):
    """All qualitative NNF trees of exactly ``size``, built without any counting tricks."""
    if size == 1:
        return [Prop(p) for p in props] + [Not(Prop(p)) for p in props]
    out = [op(x) for op in (Eventually, Globally) for x in brute_force(size - 1, props)]
    for k in range(1, size - 1):
        for x, y in itertools.product(brute_force(k, props), brute_force(size - 1 - k, props)):
            out += [op(x, y) for op in (And, Or, Until, WeakUntil, Release)]
    return out


@pytest.mark.parametrize("size", [1, 2, 3, 4])
def test_counts_match_brute_force(size):
    assert count_formulas(size, 2) == len(brute_force(size, ("a", "b")))


def test_size_two_support_and_uniformity():
    expected = {to_text(op(l)) for op in (Eventually, Globally)
                for l in [Prop(p) for p in P] + [Not(Prop(p)) for p in P]}
    draws = Counter(to_text(random_formula(2, P, seed=s)) for s in range(3000))
    assert set(draws) == expected
    # 12 outcomes, 250 expected each; 5 sigma is about 76
    assert all(abs(n - 250) < 80 for n in draws.values())


def test_size_one_is_infeasible():
    with pytest.raises(ValueError):
        random_formula(1, P, seed=0)


def test_seed_determinism():
    assert random_formula(6, P, seed=11) == random_formula(6, P, seed=11)
    assert random_formulas(5, 4, P, seed=3) == random_formulas(5, 4, P, seed=3)


@given(st.integers(2, 9), st.integers(0, 10_000), st.booleans())
def test_random_formula_postconditions(size, seed, qualitative):
    phi = random_formula(size, P, qualitative, seed)
    assert formula_size(phi) == size
    assert has_temporal(phi)
    assert is_nnf(phi)
    assert parse(to_text(phi)) == phi
    if qualitative:
        assert is_qualitative(phi)


def test_random_formulas_are_distinct():
    phis = random_formulas(10, 3, P, seed=0)
    assert len(phis) == len(set(phis)) == 10
