"""Enumerative baselines: smallest consistent formula and most accurate formula.

Candidates are NNF formulas built bottom-up by size. On a fixed dataset a
formula is represented by its truth values at every position of every trace,
stored as one Python int (a bitset over traces) per timestep; two candidates
with identical values are interchangeable inside any larger formula, so only
the first of each value class is kept. That pruning preserves both the
minimum size of a consistent formula and the best reachable accuracy.
"""
from __future__ import annotations

import time
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, Sequence

from .data import Dataset
from .ltl import (
    FALSE, TRUE, And, Eventually, Formula, Globally, Next, Not, Or, Prop, Release,
    Until, WeakNext, WeakUntil, has_temporal, sort_key, valuation,
)

QUALITATIVE_UNARY = (Eventually, Globally)
METRIC_UNARY = (Next, WeakNext)
COMMUTATIVE = (And, Or)
ORDERED = (Until, WeakUntil, Release)


@dataclass(frozen=True)
class SearchBudget:
    max_size: int = 10
    time_limit: float | None = 60.0       # seconds
    max_candidates: int = 2_000_000       # distinct value classes kept in memory
    qualitative: bool = True

    def __post_init__(self):
        if self.max_size < 0:
            raise ValueError("max size must be non-negative")


@dataclass
class LearnerResult:
    formula: Formula | None
    status: str              # "found" | "timeout" | "exhausted" | "contradictory"
    accuracy: float | None = None
    size: int | None = None
    searched_size: int = 0   # largest size fully enumerated
    candidates: int = 0
    elapsed: float = 0.0

    @property
    def ok(self) -> bool:
        return self.status == "found"


# ---------------------------------------------------------------------------
# plain syntactic enumeration

def enumerate_formulas(size: int, props: Sequence[str], qualitative: bool = True) -> Iterator[Formula]:
    """Every NNF formula of exactly ``size`` (And/Or operands in canonical order).

    For size >= 2 only formulas with a temporal operator are yielded.
    """
    for phi in _all_of_size(size, tuple(props), qualitative):
        if size < 2 or has_temporal(phi):
            yield phi


@lru_cache(maxsize=64)
def _all_of_size(size: int, props: tuple[str, ...], qualitative: bool) -> tuple[Formula, ...]:
    if size < 1:
        return ()
    if size == 1:
        out = []
        for p in props:
            out += [Prop(p), Not(Prop(p))]
        return tuple(out)
    unary = QUALITATIVE_UNARY if qualitative else QUALITATIVE_UNARY + METRIC_UNARY
    out = [op(a) for op in unary for a in _all_of_size(size - 1, props, qualitative)]
    for left in range(1, size - 1):
        lhs = _all_of_size(left, props, qualitative)
        rhs = _all_of_size(size - 1 - left, props, qualitative)
        for op in COMMUTATIVE:
            out += [op(a, b) for a in lhs for b in rhs if sort_key(a) <= sort_key(b)]
        for op in ORDERED:
            out += [op(a, b) for a in lhs for b in rhs]
    return tuple(out)


# ---------------------------------------------------------------------------
# value-class enumeration on a dataset

class _Timeout(Exception):
    pass


class _Pool:
    """Distinct value classes on one dataset, grown one size at a time."""

    def __init__(self, data: Dataset, budget: SearchBudget, deadline: float | None):
        X = data.array()
        self.N, self.T, _ = X.shape
        self.full = (1 << self.N) - 1
        self.budget = budget
        self.deadline = deadline
        self.seen: dict[tuple[int, ...], tuple] = {}
        self.levels: list[list[tuple[tuple, tuple[int, ...]]]] = []
        self.count = 0
        weights = [1 << n for n in range(self.N)]
        # literal bitsets per timestep
        self.literals = []
        for j, p in enumerate(data.props):
            vals = tuple(sum(w for w, bit in zip(weights, X[:, t, j]) if bit) for t in range(self.T))
            self.literals.append((Prop(p), vals))
            self.literals.append((Not(Prop(p)), tuple(self.full ^ v for v in vals)))

    def _check_time(self):
        if self.deadline is not None and time.monotonic() >= self.deadline:
            raise _Timeout

    def _add(self, node, vals, level):
        self.count += 1
        if (self.count & 1023) == 0:
            self._check_time()
        if vals in self.seen:
            return
        if len(self.seen) >= self.budget.max_candidates:
            raise _Timeout
        self.seen[vals] = node
        level.append((node, vals))

    def grow(self) -> list[tuple[tuple, tuple[int, ...]]]:
        """Build the next size level and return its new value classes.

        Nodes are lightweight tuples ``(op, *children)``; see ``build``.
        """
        size = len(self.levels)
        level: list = []
        self.levels.append(level)
        if size == 0:
            for c, v in ((TRUE, self.full), (FALSE, 0)):
                self._add((c,), (v,) * self.T, level)
            return level
        if size == 1:
            for phi, vals in self.literals:
                self._add((phi,), vals, level)
            return level
        unary = QUALITATIVE_UNARY if self.budget.qualitative else QUALITATIVE_UNARY + METRIC_UNARY
        for op in unary:
            for a, va in self.levels[size - 1]:
                self._add((op, a), self._unary(op, va), level)
        for left in range(0, size):
            right = size - 1 - left
            lhs, rhs = self.levels[left], self.levels[right]
            for i, (a, va) in enumerate(lhs):
                for k, (b, vb) in enumerate(rhs):
                    if left < right or (left == right and i <= k):
                        self._add((And, a, b), tuple(x & y for x, y in zip(va, vb)), level)
                        self._add((Or, a, b), tuple(x | y for x, y in zip(va, vb)), level)
                    for op in ORDERED:
                        self._add((op, a, b), self._binary(op, va, vb), level)
        return level

    def _unary(self, op, v):
        T, out = self.T, [0] * self.T
        if op is Eventually:
            acc = 0
            for t in range(T - 1, -1, -1):
                acc |= v[t]
                out[t] = acc
        elif op is Globally:
            acc = self.full
            for t in range(T - 1, -1, -1):
                acc &= v[t]
                out[t] = acc
        elif op is Next:
            out = list(v[1:]) + [0]
        else:
            out = list(v[1:]) + [self.full]
        return tuple(out)

    def _binary(self, op, a, b):
        T, out = self.T, [0] * self.T
        if op is Release:
            acc = self.full
            for t in range(T - 1, -1, -1):
                acc = b[t] & (a[t] | acc)
                out[t] = acc
        else:
            acc = self.full if op is WeakUntil else 0
            for t in range(T - 1, -1, -1):
                acc = b[t] | (a[t] & acc)
                out[t] = acc
        return tuple(out)


def build(node: tuple) -> Formula:
    if len(node) == 1:
        return node[0]
    return node[0](*(build(c) for c in node[1:]))


def _label_bits(data: Dataset) -> int:
    return sum(1 << n for n, lab in enumerate(data.labels) if lab)


def _contradictory(data: Dataset) -> bool:
    seen: dict = {}
    for lt in data.traces:
        if seen.setdefault(lt.trace.steps, lt.label) != lt.label:
            return True
    return False


def _deadline(budget: SearchBudget, start: float) -> float | None:
    return None if budget.time_limit is None else start + budget.time_limit


def exact_learner(data: Dataset, budget: SearchBudget = SearchBudget()) -> LearnerResult:
    """Smallest formula consistent with every label, scanning sizes upward."""
    start = time.monotonic()
    if _contradictory(data):
        return LearnerResult(None, "contradictory", elapsed=time.monotonic() - start)
    pool = _Pool(data, budget, _deadline(budget, start))
    target = _label_bits(data)
    searched = -1
    try:
        for size in range(budget.max_size + 1):
            for node, vals in pool.grow():
                if vals[0] == target:
                    return LearnerResult(build(node), "found", 1.0, size, size - 1, pool.count,
                                         time.monotonic() - start)
            searched = size
    except _Timeout:
        return LearnerResult(None, "timeout", searched_size=searched, candidates=pool.count,
                             elapsed=time.monotonic() - start)
    return LearnerResult(None, "exhausted", searched_size=searched, candidates=pool.count,
                         elapsed=time.monotonic() - start)


def max_accuracy_learner(data: Dataset, budget: SearchBudget = SearchBudget()) -> LearnerResult:
    """Most accurate formula up to the size cap; ties go to the smaller, then earlier one.

    On timeout the best formula found so far is returned with status "timeout".
    """
    start = time.monotonic()
    pool = _Pool(data, budget, _deadline(budget, start))
    target = _label_bits(data)
    N = pool.N
    best = (-1, (TRUE,), 0)   # (correct count, node, size)
    status = "found"
    searched = -1
    try:
        for size in range(budget.max_size + 1):
            for node, vals in pool.grow():
                correct = N - (vals[0] ^ target).bit_count()
                if correct > best[0]:
                    best = (correct, node, size)
            searched = size
            if best[0] == N:
                break
    except _Timeout:
        status = "timeout"
    correct, node, size = best
    if correct < 0:
        node, size = (TRUE,), 0
        correct = int(data.labels.sum())
    return LearnerResult(build(node), status, correct / N, size, searched, pool.count,
                         time.monotonic() - start)


def accuracy_of(phi: Formula, data: Dataset) -> float:
    """Recompute a formula's accuracy on ``data`` with the reference semantics."""
    pred = valuation(phi, data.array(), data.props)[:, 0]
    return float((pred == data.labels).mean())
