"""Uniform random sampling of NNF formulas of an exact size."""
from __future__ import annotations

import random
from functools import lru_cache
from typing import Sequence

from .ltl import (
    And, Eventually, Formula, Globally, Next, Not, Or, Prop, Release, Until,
    WeakNext, WeakUntil, has_temporal,
)

QUALITATIVE_UNARY = (Eventually, Globally)
METRIC_UNARY = (Next, WeakNext)
BINARY = (And, Or, Until, WeakUntil, Release)


def _unary_ops(qualitative: bool):
    return QUALITATIVE_UNARY if qualitative else QUALITATIVE_UNARY + METRIC_UNARY


@lru_cache(maxsize=None)
def count_formulas(size: int, n_props: int, qualitative: bool = True) -> int:
    """Number of NNF formulas (literals at the leaves) of exactly ``size``."""
    if size < 1:
        return 0
    if size == 1:
        return 2 * n_props
    total = len(_unary_ops(qualitative)) * count_formulas(size - 1, n_props, qualitative)
    for left in range(1, size - 1):
        total += len(BINARY) * count_formulas(left, n_props, qualitative) * count_formulas(
            size - 1 - left, n_props, qualitative)
    return total


def _sample(size: int, props: tuple[str, ...], qualitative: bool, rng: random.Random) -> Formula:
    n = len(props)
    if size == 1:
        k = rng.randrange(2 * n)
        p = Prop(props[k // 2])
        return Not(p) if k % 2 else p
    unary = _unary_ops(qualitative)
    r = rng.randrange(count_formulas(size, n, qualitative))
    block = count_formulas(size - 1, n, qualitative)
    if r < len(unary) * block:
        return unary[r // block](_sample(size - 1, props, qualitative, rng))
    r -= len(unary) * block
    for left in range(1, size - 1):
        per_op = count_formulas(left, n, qualitative) * count_formulas(size - 1 - left, n, qualitative)
        if r < len(BINARY) * per_op:
            op = BINARY[r // per_op]
            return op(_sample(left, props, qualitative, rng),
                      _sample(size - 1 - left, props, qualitative, rng))
        r -= len(BINARY) * per_op
    raise AssertionError("unreachable")


def random_formula(size: int, props: Sequence[str], qualitative: bool = True,
                   seed: int | random.Random | None = None) -> Formula:
    """Uniformly random NNF formula of exactly ``size`` with a temporal operator.

    Sampling is uniform over all NNF trees of that size (counts by dynamic
    programming), rejecting trees without a temporal operator.
    """
    if size < 2:
        raise ValueError("formulas with a temporal operator have size >= 2")
    rng = seed if isinstance(seed, random.Random) else random.Random(seed)
    props = tuple(props)
    while True:
        phi = _sample(size, props, qualitative, rng)
        if has_temporal(phi):
            return phi


def random_formulas(count: int, size: int, props: Sequence[str], qualitative: bool = True,
                    seed: int | None = None, max_tries: int = 10_000) -> list[Formula]:
    """Up to ``count`` distinct formulas of one size (fewer if not that many exist)."""
    rng = random.Random(seed)
    out: list[Formula] = []
    seen = set()
    tries = 0
    while len(out) < count and tries < max_tries:
        tries += 1
        phi = random_formula(size, props, qualitative, rng)
        if phi not in seen:
            seen.add(phi)
            out.append(phi)
    return out
