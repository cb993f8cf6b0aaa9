import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import all_traces
from neuralltlf.automata import characteristic_sample, formula_to_dfa
from neuralltlf.data import (
    UnbalancedClassesError, build_dataset, inject_noise, pad_stutter, random_trace,
    read_dataset, write_dataset,
)
from neuralltlf.generate import random_formula
from neuralltlf.ltl import TRUE, Trace, parse, satisfies

P = ("a", "b", "c")


def test_random_trace_shape_and_seed():
    t = random_trace(P, 1, seed=0)
    assert len(t) == 1 and len(t.steps[0]) == 3
    assert random_trace(P, 15, seed=4) == random_trace(P, 15, seed=4)
    with pytest.raises(ValueError):
        random_trace(P, 0, seed=0)


def test_random_trace_bits_are_fair():
    bits = np.array(random_trace(("a",), 100_000, seed=1).steps)
    assert abs(bits.mean() - 0.5) < 0.01


def test_pad_stutter():
    t = Trace.of(["a"], [(1,)])
    assert pad_stutter(t, 3).steps == ((True,),) * 3
    u = Trace.of(["a"], [(0,), (1,)])
    assert pad_stutter(u, 2) == u
    with pytest.raises(ValueError):
        pad_stutter(u, 1)


def test_padding_preserves_qualitative_labels_exhaustive():
    props = ("a", "b")
    traces = all_traces(props, 4)
    for seed in range(40):
        phi = random_formula(2 + seed % 4, props, seed=seed)
        for t in traces:
            assert satisfies(phi, t) == satisfies(phi, pad_stutter(t, 6))


def _dataset(text="a U b", n=100, seed=0):
    phi = parse(text)
    sample = characteristic_sample(formula_to_dfa(phi, P), 15)
    return phi, build_dataset(phi, P, n, n, 15, sample, seed=seed)


def test_build_dataset_counts_and_labels():
    phi, d = _dataset(n=500)
    assert len(d) == 1000 and d.counts() == (500, 500)
    assert d.length == 15
    for lt in d.traces:
        assert satisfies(phi, lt.trace) == lt.label
    assert d.provenance["characteristic"] > 0


def test_build_dataset_contains_padded_sample():
    phi = parse("a U b")
    sample = characteristic_sample(formula_to_dfa(phi, P), 15)
    d = build_dataset(phi, P, 100, 100, 15, sample, seed=0)
    have = {lt.trace for lt in d.traces}
    assert all(pad_stutter(t, 15) in have for t, _ in sample)


def test_rare_class_is_still_filled():
    # a uniform random length-15 trace violates F a with probability 2^-15
    phi, d = _dataset("F a", n=100)
    assert d.counts() == (100, 100)


def test_unsatisfiable_balance():
    with pytest.raises(UnbalancedClassesError):
        build_dataset(TRUE, P, 5, 5, 4, seed=0, max_draws=5_000)


def test_rejects_metric_and_bad_sample():
    with pytest.raises(ValueError):
        build_dataset(parse("X a"), P, 5, 5, 4, seed=0)
    wrong = [(Trace.of(P, [(1, 0, 0)]), False)]
    with pytest.raises(ValueError):
        build_dataset(parse("F a"), P, 5, 5, 4, wrong, seed=0)


def test_build_dataset_deterministic():
    _, d1 = _dataset(seed=9)
    _, d2 = _dataset(seed=9)
    assert d1.equals(d2)


def test_noise_flips_exact_count():
    _, d = _dataset(n=500)
    noisy = inject_noise(d, 0.01, seed=3)
    flipped = [i for i, (x, y) in enumerate(zip(d.traces, noisy.traces)) if x.label != y.label]
    assert len(flipped) == 10
    assert flipped == noisy.provenance["flipped"]


def test_noise_zero_and_involution():
    _, d = _dataset()
    assert inject_noise(d, 0.0, seed=1).traces == d.traces
    twice = inject_noise(inject_noise(d, 0.05, seed=2), 0.05, seed=2)
    assert twice.traces == d.traces


@given(st.floats(0, 1), st.integers(0, 100))
def test_noise_rate_property(rate, seed):
    _, d = _dataset(n=20)
    noisy = inject_noise(d, rate, seed=seed)
    diff = sum(x.label != y.label for x, y in zip(d.traces, noisy.traces))
    assert diff == int(np.floor(rate * len(d) + 1e-9))


def test_file_round_trip(tmp_path):
    _, d = _dataset()
    d = inject_noise(d, 0.02, seed=5)
    path = tmp_path / "d.jsonl"
    write_dataset(d, path)
    assert read_dataset(path).equals(d)
    header = path.read_text().splitlines()[0]
    assert '"props": ["a", "b", "c"]' in header and '"target": "a U b"' in header
