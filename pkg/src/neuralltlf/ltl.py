"""LTLf syntax trees, text format, and finite-trace semantics.

Formulas are immutable, hashable trees. Traces are finite, nonempty
sequences of truth assignments over an ordered proposition set.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


class LTLSyntaxError(ValueError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class Formula:
    """Base class for all formula nodes."""

    __slots__ = ()
    children: tuple

    def __post_init__(self):
        object.__setattr__(self, "_hash", hash((type(self).__name__,) + self._fields()))

    def _fields(self) -> tuple:
        raise NotImplementedError

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        if self is other:
            return True
        if type(self) is not type(other) or self._hash != other._hash:
            return False
        return self._fields() == other._fields()

    def __str__(self):
        return to_text(self)

    # operator sugar, handy in tests and scripts
    def __and__(self, other):
        return And(self, other)

    def __or__(self, other):
        return Or(self, other)

    def __invert__(self):
        return Not(self)


@dataclass(frozen=True, eq=False)
class Const(Formula):
    value: bool
    _hash: int = field(init=False, repr=False, compare=False)

    def _fields(self):
        return (self.value,)

    @property
    def children(self):
        return ()


@dataclass(frozen=True, eq=False)
class Prop(Formula):
    name: str
    _hash: int = field(init=False, repr=False, compare=False)

    def _fields(self):
        return (self.name,)

    @property
    def children(self):
        return ()


@dataclass(frozen=True, eq=False)
class _Unary(Formula):
    arg: Formula
    _hash: int = field(init=False, repr=False, compare=False)

    def _fields(self):
        return (self.arg,)

    @property
    def children(self):
        return (self.arg,)


@dataclass(frozen=True, eq=False)
class _Binary(Formula):
    left: Formula
    right: Formula
    _hash: int = field(init=False, repr=False, compare=False)

    def _fields(self):
        return (self.left, self.right)

    @property
    def children(self):
        return (self.left, self.right)


class Not(_Unary): pass
class Next(_Unary): pass
class WeakNext(_Unary): pass
class Eventually(_Unary): pass
class Globally(_Unary): pass
class And(_Binary): pass
class Or(_Binary): pass
class Until(_Binary): pass
class WeakUntil(_Binary): pass
class Release(_Binary): pass


TRUE = Const(True)
FALSE = Const(False)

UNARY_TEMPORAL = (Next, WeakNext, Eventually, Globally)
BINARY_TEMPORAL = (Until, WeakUntil, Release)
TEMPORAL = UNARY_TEMPORAL + BINARY_TEMPORAL
METRIC = (Next, WeakNext)


def rebuild(phi: Formula, children: Sequence[Formula]) -> Formula:
    """Same node type as ``phi`` with new children."""
    if isinstance(phi, _Unary):
        (a,) = children
        return phi if a is phi.arg else type(phi)(a)
    if isinstance(phi, _Binary):
        a, b = children
        if a is phi.left and b is phi.right:
            return phi
        return type(phi)(a, b)
    return phi


def subformulas(phi: Formula) -> Iterable[Formula]:
    """Pre-order traversal (with repeats)."""
    stack = [phi]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(node.children))


def propositions(phi: Formula) -> set[str]:
    return {n.name for n in subformulas(phi) if isinstance(n, Prop)}


def formula_size(phi: Formula) -> int:
    """Temporal operators + binary logical operators + proposition occurrences.

    Negations and constants are free.
    """
    return sum(
        1 for n in subformulas(phi)
        if isinstance(n, (Prop, And, Or)) or isinstance(n, TEMPORAL)
    )


def is_qualitative(phi: Formula) -> bool:
    return not any(isinstance(n, METRIC) for n in subformulas(phi))


def has_temporal(phi: Formula) -> bool:
    return any(isinstance(n, TEMPORAL) for n in subformulas(phi))


def is_nnf(phi: Formula) -> bool:
    return all(
        isinstance(n.arg, Prop) for n in subformulas(phi) if isinstance(n, Not)
    )


def to_nnf(phi: Formula, negate: bool = False) -> Formula:
    """Push negations down to propositions using the finite-trace duals."""
    match phi:
        case Const(value=v):
            return Const(v != negate)
        case Prop():
            return Not(phi) if negate else phi
        case Not(arg=a):
            return to_nnf(a, not negate)
        case And(left=a, right=b):
            op = Or if negate else And
            return op(to_nnf(a, negate), to_nnf(b, negate))
        case Or(left=a, right=b):
            op = And if negate else Or
            return op(to_nnf(a, negate), to_nnf(b, negate))
        case Next(arg=a):
            return (WeakNext if negate else Next)(to_nnf(a, negate))
        case WeakNext(arg=a):
            return (Next if negate else WeakNext)(to_nnf(a, negate))
        case Eventually(arg=a):
            return (Globally if negate else Eventually)(to_nnf(a, negate))
        case Globally(arg=a):
            return (Eventually if negate else Globally)(to_nnf(a, negate))
        case Until(left=a, right=b):
            return (Release if negate else Until)(to_nnf(a, negate), to_nnf(b, negate))
        case Release(left=a, right=b):
            return (Until if negate else Release)(to_nnf(a, negate), to_nnf(b, negate))
        case WeakUntil(left=a, right=b):
            if not negate:
                return WeakUntil(to_nnf(a), to_nnf(b))
            # !(a W b) == !b U (!a & !b)
            nb = to_nnf(b, True)
            return Until(nb, And(to_nnf(a, True), nb))
    raise TypeError(f"not a formula: {phi!r}")


# ---------------------------------------------------------------------------
# text format

_UNARY_KW = {"X": Next, "WX": WeakNext, "F": Eventually, "G": Globally}
_BINARY_TEMPORAL_KW = {"U": Until, "W": WeakUntil, "R": Release}
KEYWORDS = frozenset(_UNARY_KW) | frozenset(_BINARY_TEMPORAL_KW) | {"true", "false"}

_TOKEN = re.compile(r"\s*(?:([A-Za-z_][A-Za-z0-9_]*)|(.))")


def _tokenize(text: str) -> list[tuple[str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m.group(1) is None and m.group(2) is None:
            break
        start = m.start(1) if m.group(1) is not None else m.start(2)
        tok = m.group(1) or m.group(2)
        if tok not in KEYWORDS and m.group(1) is None and tok not in "!&|()":
            raise LTLSyntaxError(f"unexpected character {tok!r}", start)
        tokens.append((tok, start))
        pos = m.end()
    return tokens


class _Parser:
    # precedence: unary > U/W/R (right-assoc) > & > |   (& and | left-assoc)

    def __init__(self, text: str, props):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0
        self.props = None if props is None else set(props)

    def peek(self):
        return self.tokens[self.i][0] if self.i < len(self.tokens) else None

    def pos(self):
        return self.tokens[self.i][1] if self.i < len(self.tokens) else len(self.text)

    def take(self):
        tok = self.tokens[self.i][0]
        self.i += 1
        return tok

    def parse(self) -> Formula:
        phi = self.disjunction()
        if self.peek() is not None:
            raise LTLSyntaxError(f"unexpected token {self.peek()!r}", self.pos())
        return phi

    def disjunction(self):
        phi = self.conjunction()
        while self.peek() == "|":
            self.take()
            phi = Or(phi, self.conjunction())
        return phi

    def conjunction(self):
        phi = self.temporal()
        while self.peek() == "&":
            self.take()
            phi = And(phi, self.temporal())
        return phi

    def temporal(self):
        phi = self.unary()
        if self.peek() in _BINARY_TEMPORAL_KW:
            op = _BINARY_TEMPORAL_KW[self.take()]
            return op(phi, self.temporal())
        return phi

    def unary(self):
        tok = self.peek()
        if tok is None:
            raise LTLSyntaxError("unexpected end of input", self.pos())
        if tok == "!":
            self.take()
            return Not(self.unary())
        if tok in _UNARY_KW:
            self.take()
            return _UNARY_KW[tok](self.unary())
        if tok == "(":
            self.take()
            phi = self.disjunction()
            if self.peek() != ")":
                raise LTLSyntaxError("expected ')'", self.pos())
            self.take()
            return phi
        if tok == "true":
            self.take()
            return TRUE
        if tok == "false":
            self.take()
            return FALSE
        if tok in KEYWORDS or not (tok[0].isalpha() or tok[0] == "_"):
            raise LTLSyntaxError(f"unexpected token {tok!r}", self.pos())
        if self.props is not None and tok not in self.props:
            raise LTLSyntaxError(f"unknown proposition {tok!r}", self.pos())
        self.take()
        return Prop(tok)


def parse(text: str, props: Iterable[str] | None = None) -> Formula:
    """Parse the ASCII formula grammar; ``props`` restricts proposition names."""
    return _Parser(text, props).parse()


_UNARY_SYM = {Not: "!", Next: "X ", WeakNext: "WX ", Eventually: "F ", Globally: "G "}
_BINARY_SYM = {And: "&", Or: "|", Until: "U", WeakUntil: "W", Release: "R"}
_PREC = {Or: 1, And: 2, Until: 3, WeakUntil: 3, Release: 3}


def to_text(phi: Formula) -> str:
    match phi:
        case Const(value=v):
            return "true" if v else "false"
        case Prop(name=n):
            return n
        case _Unary(arg=a):
            inner = to_text(a)
            if isinstance(a, _Binary):
                inner = f"({inner})"
            return _UNARY_SYM[type(phi)] + inner
        case _Binary(left=a, right=b):
            p = _PREC[type(phi)]
            lt, rt = to_text(a), to_text(b)
            right_assoc = p == 3
            if isinstance(a, _Binary) and (_PREC[type(a)] < p or (right_assoc and _PREC[type(a)] == p)):
                lt = f"({lt})"
            if isinstance(b, _Binary) and (_PREC[type(b)] < p or (not right_assoc and _PREC[type(b)] == p)):
                rt = f"({rt})"
            return f"{lt} {_BINARY_SYM[type(phi)]} {rt}"
    raise TypeError(f"not a formula: {phi!r}")


def sort_key(phi: Formula):
    return (formula_size(phi), to_text(phi))


# ---------------------------------------------------------------------------
# traces and semantics

@dataclass(frozen=True)
class Trace:
    """A finite sequence of assignments; ``steps[t][j]`` is proposition ``props[j]`` at t."""

    props: tuple[str, ...]
    steps: tuple[tuple[bool, ...], ...]

    def __post_init__(self):
        if len(self.steps) == 0:
            raise ValueError("traces must have at least one timestep")
        width = len(self.props)
        for s in self.steps:
            if len(s) != width:
                raise ValueError(f"assignment {s} does not match {width} propositions")

    @classmethod
    def of(cls, props: Sequence[str], steps) -> "Trace":
        return cls(tuple(props), tuple(tuple(bool(b) for b in s) for s in steps))

    def __len__(self):
        return len(self.steps)

    def letters(self) -> tuple[int, ...]:
        """Assignments encoded as integers, bit j = proposition j."""
        return tuple(sum(int(b) << j for j, b in enumerate(s)) for s in self.steps)

    def array(self) -> np.ndarray:
        return np.array(self.steps, dtype=bool).reshape(len(self.steps), len(self.props))


def valuation(phi: Formula, steps: np.ndarray, props: Sequence[str]) -> np.ndarray:
    """Truth value of ``phi`` at every timestep of a batch of equal-length traces.

    ``steps`` has shape (N, T, |P|); the result has shape (N, T).
    """
    steps = np.asarray(steps, dtype=bool)
    if steps.ndim != 3 or steps.shape[1] == 0:
        raise ValueError("expected a nonempty batch of shape (N, T, |P|)")
    index = {p: j for j, p in enumerate(props)}
    cache: dict[Formula, np.ndarray] = {}
    return _valuation(phi, steps, index, cache)


def _shift(v: np.ndarray, end: bool) -> np.ndarray:
    """v[:, t+1] with ``end`` at the last timestep."""
    out = np.empty_like(v)
    out[:, :-1] = v[:, 1:]
    out[:, -1] = end
    return out


def _valuation(phi, steps, index, cache):
    if phi in cache:
        return cache[phi]
    n, T, _ = steps.shape
    rec = lambda a: _valuation(a, steps, index, cache)
    match phi:
        case Const(value=v):
            out = np.full((n, T), v, dtype=bool)
        case Prop(name=name):
            if name not in index:
                raise KeyError(f"proposition {name!r} not in trace propositions")
            out = steps[:, :, index[name]].copy()
        case Not(arg=a):
            out = ~rec(a)
        case And(left=a, right=b):
            out = rec(a) & rec(b)
        case Or(left=a, right=b):
            out = rec(a) | rec(b)
        case Next(arg=a):
            out = _shift(rec(a), False)
        case WeakNext(arg=a):
            out = _shift(rec(a), True)
        case Eventually(arg=a):
            out = _until(np.ones((n, T), bool), rec(a), False)
        case Globally(arg=a):
            out = _release(np.zeros((n, T), bool), rec(a))
        case Until(left=a, right=b):
            out = _until(rec(a), rec(b), False)
        case WeakUntil(left=a, right=b):
            out = _until(rec(a), rec(b), True)
        case Release(left=a, right=b):
            out = _release(rec(a), rec(b))
        case _:
            raise TypeError(f"not a formula: {phi!r}")
    cache[phi] = out
    return out


def _until(a, b, end):
    out = np.empty_like(a)
    nxt = np.full(a.shape[0], end)
    for t in range(a.shape[1] - 1, -1, -1):
        nxt = b[:, t] | (a[:, t] & nxt)
        out[:, t] = nxt
    return out


def _release(a, b):
    out = np.empty_like(a)
    nxt = np.ones(a.shape[0], bool)
    for t in range(a.shape[1] - 1, -1, -1):
        nxt = b[:, t] & (a[:, t] | nxt)
        out[:, t] = nxt
    return out


def evaluate(phi: Formula, trace: Trace, t: int = 0) -> bool:
    if not 0 <= t < len(trace):
        raise IndexError(f"timestep {t} outside trace of length {len(trace)}")
    return bool(valuation(phi, trace.array()[None], trace.props)[0, t])


def satisfies(phi: Formula, trace: Trace) -> bool:
    return evaluate(phi, trace, 0)
