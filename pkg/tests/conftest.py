import itertools

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from neuralltlf.ltl import (
    FALSE, TRUE, And, Eventually, Globally, Next, Not, Or, Prop, Release, Trace,
    Until, WeakNext, WeakUntil,
)

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def all_traces(props, max_len):
    """Every trace over ``props`` with 1..max_len steps."""
    out = []
    for T in range(1, max_len + 1):
        for bits in itertools.product([False, True], repeat=T * len(props)):
            steps = [bits[t * len(props):(t + 1) * len(props)] for t in range(T)]
            out.append(Trace.of(props, steps))
    return out


def trace_batches(props, max_len):
    """Exhaustive traces grouped by length as (N, T, |P|) arrays."""
    out = []
    for T in range(1, max_len + 1):
        bits = np.array(list(itertools.product([0, 1], repeat=T * len(props))), dtype=bool)
        out.append(bits.reshape(-1, T, len(props)))
    return out


def formulas(props=("a", "b"), max_leaves=4, qualitative=False, constants=False):
    """Hypothesis strategy for arbitrary (not necessarily NNF) formulas."""
    leaves = [st.sampled_from([Prop(p) for p in props])]
    if constants:
        leaves.append(st.sampled_from([TRUE, FALSE]))
    unary = [Not, Eventually, Globally] + ([] if qualitative else [Next, WeakNext])
    binary = [And, Or, Until, WeakUntil, Release]

    def extend(children):
        return st.one_of(
            st.builds(lambda op, a: op(a), st.sampled_from(unary), children),
            st.builds(lambda op, a, b: op(a, b), st.sampled_from(binary), children, children),
        )

    return st.recursive(st.one_of(*leaves), extend, max_leaves=max_leaves)


def traces(props=("a", "b"), max_len=6):
    width = len(props)
    return st.lists(st.lists(st.booleans(), min_size=width, max_size=width),
                    min_size=1, max_size=max_len).map(lambda s: Trace.of(props, s))


def reference_eval(phi, steps, t, props=("a", "b")):
    """Direct recursive reading of the finite-trace semantics."""
    T = len(steps)
    rec = lambda f, k: reference_eval(f, steps, k, props)
    match phi:
        case Prop(name=n):
            return bool(steps[t][props.index(n)])
        case Not(arg=x):
            return not rec(x, t)
        case And(left=x, right=y):
            return rec(x, t) and rec(y, t)
        case Or(left=x, right=y):
            return rec(x, t) or rec(y, t)
        case Next(arg=x):
            return t + 1 < T and rec(x, t + 1)
        case WeakNext(arg=x):
            return t + 1 >= T or rec(x, t + 1)
        case Eventually(arg=x):
            return any(rec(x, k) for k in range(t, T))
        case Globally(arg=x):
            return all(rec(x, k) for k in range(t, T))
        case Until(left=x, right=y):
            return any(rec(y, k) and all(rec(x, j) for j in range(t, k)) for k in range(t, T))
        case WeakUntil(left=x, right=y):
            return rec(Until(x, y), t) or rec(Globally(x), t)
        case Release(left=x, right=y):
            return not rec(Until(Not(x), Not(y)), t)
        case _:
            return phi.value


@pytest.fixture(scope="session")
def exhaustive_ab4():
    return all_traces(("a", "b"), 4)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is None or not mod.VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.VERDICTS):
        terminalreporter.write_line(mod.VERDICTS[n])
