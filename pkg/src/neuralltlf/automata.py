"""Finite automata over the assignment alphabet 2^P.

Letters are assignments encoded as integers (bit j = proposition j). All
languages are taken over *nonempty* words: whether the initial state accepts
the empty word carries no meaning and is chosen to minimise the automaton.
"""
from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

from .ltl import (
    And, Const, Eventually, Formula, Globally, Next, Not, Or, Prop, Release,
    Trace, Until, WeakNext, WeakUntil, propositions, to_nnf,
)

log = logging.getLogger(__name__)

MAX_PROPS = 8


@dataclass(frozen=True)
class Dfa:
    props: tuple[str, ...]
    transitions: tuple[tuple[int, ...], ...]  # [state][letter] -> state
    accepting: tuple[bool, ...]
    initial: int = 0

    @property
    def n_states(self) -> int:
        return len(self.transitions)

    @property
    def n_letters(self) -> int:
        return 1 << len(self.props)

    def run(self, letters: Iterable[int], state: int | None = None) -> int:
        q = self.initial if state is None else state
        for a in letters:
            q = self.transitions[q][a]
        return q

    def dump(self) -> str:
        """Text table: state, successor per letter, accepting flag."""
        head = ["state"] + [format(a, f"0{len(self.props)}b")[::-1] for a in range(self.n_letters)] + ["acc"]
        rows = ["\t".join(head)]
        for q, row in enumerate(self.transitions):
            mark = "->" if q == self.initial else ""
            rows.append("\t".join([f"{mark}{q}"] + [str(s) for s in row] + [str(int(self.accepting[q]))]))
        return "\n".join(rows)


@dataclass(frozen=True)
class Equivalence:
    """Result of :func:`dfa_equivalent`; truthy iff the languages coincide."""

    equal: bool
    counterexample: Trace | None = None

    def __bool__(self):
        return self.equal


def letter_of(assignment: Sequence[bool]) -> int:
    return sum(int(bool(b)) << j for j, b in enumerate(assignment))


def assignment_of(letter: int, width: int) -> tuple[bool, ...]:
    return tuple(bool((letter >> j) & 1) for j in range(width))


def _trace_letters(d: Dfa, trace: Trace) -> tuple[int, ...]:
    if trace.props == d.props:
        return trace.letters()
    if set(trace.props) != set(d.props):
        raise ValueError(f"trace propositions {trace.props} differ from automaton {d.props}")
    order = [trace.props.index(p) for p in d.props]
    return tuple(letter_of([s[j] for j in order]) for s in trace.steps)


def accepts(d: Dfa, trace: Trace) -> bool:
    if len(trace) == 0:
        raise ValueError("empty trace")
    return d.accepting[d.run(_trace_letters(d, trace))]


# ---------------------------------------------------------------------------
# formula progression
#
# A residual is a monotone boolean function over obligation atoms, kept as an
# antichain of minimal terms (canonical for monotone functions). An atom is
# ("S", f) -- f must hold on a nonempty remainder -- or ("W", f) -- f must hold
# unless the trace has ended.

_TRUE = frozenset({frozenset()})
_FALSE = frozenset()


def _antichain(terms) -> frozenset:
    terms = sorted(set(terms), key=len)
    kept: list[frozenset] = []
    for t in terms:
        if not any(k <= t for k in kept):
            kept.append(t)
    return frozenset(kept)


def _r_or(a, b):
    if a == _TRUE or b == _TRUE:
        return _TRUE
    return _antichain(a | b)


def _r_and(a, b):
    if not a or not b:
        return _FALSE
    return _antichain(x | y for x in a for y in b)


def _atom(kind: str, phi: Formula):
    if isinstance(phi, Const):
        # S(false) / W(true) collapse to constants
        if kind == "S" and not phi.value:
            return _FALSE
        if kind == "W" and phi.value:
            return _TRUE
    return frozenset({frozenset({(kind, phi)})})


@lru_cache(maxsize=200_000)
def _prog(phi: Formula, letter: int, index: tuple[str, ...]):
    rec = lambda f: _prog(f, letter, index)
    match phi:
        case Const(value=v):
            return _TRUE if v else _FALSE
        case Prop(name=n):
            return _TRUE if (letter >> index.index(n)) & 1 else _FALSE
        case Not(arg=Prop(name=n)):
            return _FALSE if (letter >> index.index(n)) & 1 else _TRUE
        case And(left=a, right=b):
            return _r_and(rec(a), rec(b))
        case Or(left=a, right=b):
            return _r_or(rec(a), rec(b))
        case Next(arg=a):
            return _atom("S", a)
        case WeakNext(arg=a):
            return _atom("W", a)
        case Eventually(arg=a):
            return _r_or(rec(a), _atom("S", phi))
        case Globally(arg=a):
            return _r_and(rec(a), _atom("W", phi))
        case Until(left=a, right=b):
            return _r_or(rec(b), _r_and(rec(a), _atom("S", phi)))
        case WeakUntil(left=a, right=b):
            return _r_or(rec(b), _r_and(rec(a), _atom("W", phi)))
        case Release(left=a, right=b):
            return _r_and(rec(b), _r_or(rec(a), _atom("W", phi)))
    raise TypeError(f"expected an NNF formula, got {phi!r}")


def _prog_residual(res, letter, index):
    out = _FALSE
    for term in res:
        acc = _TRUE
        for _, f in term:
            acc = _r_and(acc, _prog(f, letter, index))
            if not acc:
                break
        out = _r_or(out, acc)
        if out == _TRUE:
            break
    return out


def _residual_accepts(res) -> bool:
    return any(all(kind == "W" for kind, _ in term) for term in res)


def formula_to_dfa(phi: Formula, props: Sequence[str] | None = None) -> Dfa:
    """Minimal DFA accepting exactly the nonempty traces satisfying ``phi``."""
    props = tuple(sorted(propositions(phi))) if props is None else tuple(props)
    if len(props) > MAX_PROPS:
        raise ValueError(f"{len(props)} propositions exceeds the limit of {MAX_PROPS}")
    missing = propositions(phi) - set(props)
    if missing:
        raise ValueError(f"propositions {sorted(missing)} not in {props}")
    nnf = to_nnf(phi)
    letters = range(1 << len(props))

    # state 0 is the start; every other state is a residual
    ids: dict = {}
    rows: list[list[int]] = []
    acc: list[bool] = [False]
    queue: deque = deque()

    def state_of(res):
        if res not in ids:
            ids[res] = len(acc)
            acc.append(_residual_accepts(res))
            queue.append(res)
        return ids[res]

    rows.append([state_of(_prog(nnf, a, props)) for a in letters])
    pending: dict = {}
    while queue:
        res = queue.popleft()
        pending[ids[res]] = [state_of(_prog_residual(res, a, props)) for a in letters]
    rows.extend(pending[q] for q in range(1, len(acc)))
    raw = Dfa(props, tuple(tuple(r) for r in rows), tuple(acc), 0)
    return minimize(raw)


# ---------------------------------------------------------------------------
# minimisation

def _reachable(d: Dfa) -> list[int]:
    """States in BFS order from the initial state (letters ascending)."""
    seen = {d.initial: 0}
    order = [d.initial]
    for q in order:
        for s in d.transitions[q]:
            if s not in seen:
                seen[s] = len(order)
                order.append(s)
    return order


def _refine(d: Dfa) -> Dfa:
    """Moore partition refinement + canonical BFS renumbering."""
    states = _reachable(d)
    block = {q: int(d.accepting[q]) for q in states}
    n_blocks = len(set(block.values()))
    while True:
        sig = {q: (block[q],) + tuple(block[s] for s in d.transitions[q]) for q in states}
        ids: dict = {}
        new = {q: ids.setdefault(sig[q], len(ids)) for q in states}
        if len(ids) == n_blocks:
            break
        block, n_blocks = new, len(ids)
    rep: dict[int, int] = {}
    for q in states:
        rep.setdefault(block[q], q)
    # canonical numbering by BFS over blocks
    start = block[d.initial]
    number = {start: 0}
    order = [start]
    for b in order:
        for s in d.transitions[rep[b]]:
            if block[s] not in number:
                number[block[s]] = len(order)
                order.append(block[s])
    trans = tuple(tuple(number[block[s]] for s in d.transitions[rep[b]]) for b in order)
    accepting = tuple(d.accepting[rep[b]] for b in order)
    return Dfa(d.props, trans, accepting, 0)


def minimize(d: Dfa) -> Dfa:
    """Smallest DFA with the same language over nonempty words."""
    # detach a fresh start state with no incoming edges so its flag only
    # decides the (meaningless) empty word, then take the smaller variant
    n = d.n_states
    trans = d.transitions + (d.transitions[d.initial],)
    candidates = []
    for flag in (d.accepting[d.initial], not d.accepting[d.initial]):
        variant = Dfa(d.props, trans, d.accepting + (flag,), n)
        candidates.append(_refine(variant))
    return min(candidates, key=lambda m: m.n_states)


# ---------------------------------------------------------------------------
# equivalence

def _check_alphabet(d1: Dfa, d2: Dfa):
    if d1.props != d2.props:
        raise ValueError(f"alphabet mismatch: {d1.props} vs {d2.props}")


def dfa_equivalent(d1: Dfa, d2: Dfa) -> Equivalence:
    """Product-automaton BFS; a shortest nonempty distinguishing word on failure."""
    _check_alphabet(d1, d2)
    parent: dict = {}
    queue: deque = deque()
    for a in range(d1.n_letters):
        pair = (d1.transitions[d1.initial][a], d2.transitions[d2.initial][a])
        if pair not in parent:
            parent[pair] = (None, a)
            queue.append(pair)
    while queue:
        pair = queue.popleft()
        p, q = pair
        if d1.accepting[p] != d2.accepting[q]:
            word = []
            node = pair
            while node is not None:
                prev, a = parent[node]
                word.append(a)
                node = prev
            word.reverse()
            steps = [assignment_of(a, len(d1.props)) for a in word]
            return Equivalence(False, Trace(d1.props, tuple(steps)))
        for a in range(d1.n_letters):
            nxt = (d1.transitions[p][a], d2.transitions[q][a])
            if nxt not in parent:
                parent[nxt] = (pair, a)
                queue.append(nxt)
    return Equivalence(True)


def equivalent_formulas(phi: Formula, psi: Formula, props: Sequence[str] | None = None) -> Equivalence:
    if props is None:
        props = sorted(propositions(phi) | propositions(psi))
    return dfa_equivalent(formula_to_dfa(phi, props), formula_to_dfa(psi, props))


# ---------------------------------------------------------------------------
# characteristic samples

def access_strings(d: Dfa) -> list[tuple[int, ...]]:
    """Shortest (then lexicographically least) word reaching each state."""
    acc: dict[int, tuple[int, ...]] = {d.initial: ()}
    queue = deque([d.initial])
    while queue:
        q = queue.popleft()
        for a, s in enumerate(d.transitions[q]):
            if s not in acc:
                acc[s] = acc[q] + (a,)
                queue.append(s)
    return [acc[q] for q in range(d.n_states)]


def _distinguishing_suffix(d: Dfa, p: int, q: int, nonempty: bool) -> tuple[int, ...] | None:
    start = (p, q)
    if not nonempty and d.accepting[p] != d.accepting[q]:
        return ()
    seen = {start: ()}
    queue = deque([start])
    while queue:
        pair = queue.popleft()
        word = seen[pair]
        for a in range(d.n_letters):
            nxt = (d.transitions[pair[0]][a], d.transitions[pair[1]][a])
            w = word + (a,)
            if d.accepting[nxt[0]] != d.accepting[nxt[1]]:
                return w
            if nxt not in seen:
                seen[nxt] = w
                queue.append(nxt)
    return None


def _reject_empty(d: Dfa) -> Dfa:
    n = d.n_states
    return _refine(Dfa(d.props, d.transitions + (d.transitions[d.initial],),
                       d.accepting + (False,), n))


def characteristic_sample(d: Dfa, max_length: int | None = None) -> list[tuple[Trace, bool]]:
    """Labelled words pinning down the minimal DFA ``d``.

    Contains each state's access word, every one-letter extension of it, and
    for every pair of distinct states -- and every extension vs every state it
    does not reach -- both words continued by a shortest distinguishing
    suffix. The empty word is never emitted; words longer than ``max_length``
    are dropped with a warning.

    The sample is built for the minimal automaton that also rejects the
    empty word, which may have one state more than ``d``: a learner that
    never sees the empty word must treat it as negative.
    """
    d = _reject_empty(d)
    acc = access_strings(d)
    words: set[tuple[int, ...]] = set()
    words.update(acc)
    kernel = []
    for q in range(d.n_states):
        for a in range(d.n_letters):
            w = acc[q] + (a,)
            words.add(w)
            kernel.append((w, d.transitions[q][a]))

    cache: dict = {}

    def dist(p, q, nonempty):
        key = (p, q, nonempty)
        if key not in cache:
            cache[key] = _distinguishing_suffix(d, p, q, nonempty)
        return cache[key]

    for p in range(d.n_states):
        for q in range(p + 1, d.n_states):
            w = dist(p, q, not acc[p] or not acc[q])
            if w is not None:
                words.add(acc[p] + w)
                words.add(acc[q] + w)
    for k, r in kernel:
        if k == acc[r]:
            continue
        for p in range(d.n_states):
            if p == r:
                continue
            w = dist(p, r, not acc[p])
            if w is not None:
                words.add(acc[p] + w)
                words.add(k + w)

    words.discard(())
    if max_length is not None:
        long = [w for w in words if len(w) > max_length]
        if long:
            log.warning("dropping %d characteristic words longer than %d", len(long), max_length)
            words.difference_update(long)
    width = len(d.props)
    sample = []
    for w in sorted(words, key=lambda w: (len(w), w)):
        trace = Trace(d.props, tuple(assignment_of(a, width) for a in w))
        sample.append((trace, d.accepting[d.run(w)]))
    return sample


# ---------------------------------------------------------------------------
# RPNI state merging (used to check characteristic samples)

def rpni(sample: Iterable[tuple[Trace, bool]], props: Sequence[str]) -> Dfa:
    """Red-blue state merging over the prefix tree of a labelled sample.

    The empty word is never in a language of nonempty traces, so the root is
    labelled negative.
    """
    props = tuple(props)
    n_letters = 1 << len(props)
    # prefix tree: node 0 is the root
    delta: list[dict[int, int]] = [{}]
    label: list[bool | None] = [False]
    prefix: list[tuple[int, ...]] = [()]
    for trace, lab in sample:
        node = 0
        for a in trace.letters():
            if a not in delta[node]:
                delta.append({})
                label.append(None)
                prefix.append(prefix[node] + (a,))
                delta[node][a] = len(delta) - 1
            node = delta[node][a]
        if label[node] is not None and label[node] != lab:
            raise ValueError(f"inconsistent sample at {prefix[node]}")
        label[node] = lab

    def try_merge(delta, label, red_state, blue_state):
        delta = [dict(x) for x in delta]
        label = list(label)
        # redirect the edge into blue_state
        for node in range(len(delta)):
            for a, s in delta[node].items():
                if s == blue_state:
                    delta[node][a] = red_state
        stack = [(red_state, blue_state)]
        while stack:
            r, b = stack.pop()
            if label[b] is not None:
                if label[r] is not None and label[r] != label[b]:
                    return None
                label[r] = label[b]
            for a, child in delta[b].items():
                if a in delta[r]:
                    if delta[r][a] != child:
                        stack.append((delta[r][a], child))
                else:
                    delta[r][a] = child
        return delta, label

    red = [0]
    while True:
        blue = sorted(
            {s for r in red for s in delta[r].values() if s not in red},
            key=lambda s: (len(prefix[s]), prefix[s]),
        )
        if not blue:
            break
        b = blue[0]
        for r in red:
            merged = try_merge(delta, label, r, b)
            if merged is not None:
                delta, label = merged
                break
        else:
            red.append(b)

    index = {q: i for i, q in enumerate(red)}
    sink = len(red)
    trans = []
    for q in red:
        trans.append(tuple(index[delta[q][a]] if a in delta[q] else sink for a in range(n_letters)))
    trans.append((sink,) * n_letters)
    accepting = tuple(bool(label[q]) for q in red) + (False,)
    return minimize(Dfa(props, tuple(trans), accepting, 0))
