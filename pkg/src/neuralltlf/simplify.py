"""Size-reducing rewriting for qualitative LTLf formulas.

Every rule is a qualitative LTL equivalence, and qualitative LTL
equivalences remain valid over finite traces (stutter invariance), so the
rule set can be checked one rule at a time against the automaton oracle.
Rules are applied innermost-first until nothing changes.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

from .ltl import (
    FALSE, TRUE, And, Const, Eventually, Formula, Globally, Not, Or, Prop,
    Release, Until, WeakUntil, formula_size, is_qualitative, parse, rebuild,
    sort_key,
)


@dataclass(frozen=True)
class Rule:
    name: str
    lhs: Formula
    rhs: Formula


# metavariables are propositions whose name starts with "_"
_RULE_TEXT = [
    ("eventually-idempotent", "F F _1", "F _1"),
    ("globally-idempotent", "G G _1", "G _1"),
    ("eventually-globally-eventually", "F G F _1", "G F _1"),
    ("globally-eventually-globally", "G F G _1", "F G _1"),
    ("eventually-true", "F true", "true"),
    ("eventually-false", "F false", "false"),
    ("globally-true", "G true", "true"),
    ("globally-false", "G false", "false"),
    ("eventually-until", "F (_1 U _2)", "F _2"),
    ("globally-release", "G (_1 R _2)", "G _2"),
    ("until-true-left", "true U _1", "F _1"),
    ("until-false-left", "false U _1", "_1"),
    ("until-true-right", "_1 U true", "true"),
    ("until-false-right", "_1 U false", "false"),
    ("until-idempotent", "_1 U _1", "_1"),
    ("until-eventually", "_1 U F _2", "F _2"),
    ("until-nested-right", "_1 U (_1 U _2)", "_1 U _2"),
    ("until-nested-left", "(_1 U _2) U _2", "_1 U _2"),
    ("weak-until-true-left", "true W _1", "true"),
    ("weak-until-false-left", "false W _1", "_1"),
    ("weak-until-true-right", "_1 W true", "true"),
    ("weak-until-false-right", "_1 W false", "G _1"),
    ("weak-until-idempotent", "_1 W _1", "_1"),
    ("weak-until-nested-right", "_1 W (_1 W _2)", "_1 W _2"),
    ("weak-until-nested-left", "(_1 W _2) W _2", "_1 W _2"),
    ("release-true-left", "true R _1", "_1"),
    ("release-false-left", "false R _1", "G _1"),
    ("release-true-right", "_1 R true", "true"),
    ("release-false-right", "_1 R false", "false"),
    ("release-idempotent", "_1 R _1", "_1"),
    ("release-globally", "_1 R G _2", "G _2"),
    ("release-nested-right", "_1 R (_1 R _2)", "_1 R _2"),
    ("weak-until-intro", "(_1 U _2) | G _1", "_1 W _2"),
    ("eventually-or", "F _1 | F _2", "F (_1 | _2)"),
    ("globally-and", "G _1 & G _2", "G (_1 & _2)"),
    ("and-eventually-absorb", "_1 & F _1", "_1"),
    ("or-eventually-absorb", "_1 | F _1", "F _1"),
    ("and-globally-absorb", "_1 & G _1", "G _1"),
    ("or-globally-absorb", "_1 | G _1", "_1"),
    ("or-until-absorb", "_2 | (_1 U _2)", "_1 U _2"),
    ("and-until-absorb", "_2 & (_1 U _2)", "_2"),
    ("or-weak-until-absorb", "_2 | (_1 W _2)", "_1 W _2"),
    ("and-weak-until-absorb", "_2 & (_1 W _2)", "_2"),
    ("and-release-absorb", "_2 & (_1 R _2)", "_1 R _2"),
    ("or-release-absorb", "_2 | (_1 R _2)", "_2"),
    ("until-or-right", "(_1 U _2) | (_1 U _3)", "_1 U (_2 | _3)"),
    ("until-and-left", "(_1 U _3) & (_2 U _3)", "(_1 & _2) U _3"),
    ("weak-until-or-right", "(_1 W _2) | (_1 W _3)", "_1 W (_2 | _3)"),
    ("weak-until-and-left", "(_1 W _3) & (_2 W _3)", "(_1 & _2) W _3"),
    ("release-and-right", "(_1 R _2) & (_1 R _3)", "_1 R (_2 & _3)"),
    ("release-or-left", "(_1 R _3) | (_2 R _3)", "(_1 | _2) R _3"),
]

RULES = [Rule(name, parse(lhs), parse(rhs)) for name, lhs, rhs in _RULE_TEXT]
_PAIR_RULES = [r for r in RULES if isinstance(r.lhs, (And, Or))]
_NODE_RULES = [r for r in RULES if not isinstance(r.lhs, (And, Or))]


def _match(pattern: Formula, phi: Formula, env: dict) -> bool:
    if isinstance(pattern, Prop) and pattern.name.startswith("_"):
        bound = env.get(pattern.name)
        if bound is None:
            env[pattern.name] = phi
            return True
        return bound == phi
    if type(pattern) is not type(phi):
        return False
    if isinstance(pattern, (Const, Prop)):
        return pattern == phi
    kids_p, kids_f = pattern.children, phi.children
    if isinstance(pattern, (And, Or)):
        # commutative: try both operand orders
        for order in (kids_f, kids_f[::-1]):
            trial = dict(env)
            if all(_match(p, f, trial) for p, f in zip(kids_p, order)):
                env.clear()
                env.update(trial)
                return True
        return False
    return all(_match(p, f, env) for p, f in zip(kids_p, kids_f))


def _instantiate(template: Formula, env: dict) -> Formula:
    if isinstance(template, Prop) and template.name.startswith("_"):
        return env[template.name]
    if not template.children:
        return template
    return rebuild(template, [_instantiate(c, env) for c in template.children])


def apply_rule(rule: Rule, phi: Formula) -> Formula | None:
    env: dict = {}
    if _match(rule.lhs, phi, env):
        return _instantiate(rule.rhs, env)
    return None


# ---------------------------------------------------------------------------

def negate(phi: Formula) -> Formula:
    """Negation pushed one level down where that does not grow the formula."""
    match phi:
        case Const(value=v):
            return Const(not v)
        case Not(arg=a):
            return a
        case And(left=a, right=b):
            return Or(negate(a), negate(b))
        case Or(left=a, right=b):
            return And(negate(a), negate(b))
        case Eventually(arg=a):
            return Globally(negate(a))
        case Globally(arg=a):
            return Eventually(negate(a))
        case Until(left=a, right=b):
            return Release(negate(a), negate(b))
        case Release(left=a, right=b):
            return Until(negate(a), negate(b))
    return Not(phi)


def _flatten(op, phi, out):
    if isinstance(phi, op):
        _flatten(op, phi.left, out)
        _flatten(op, phi.right, out)
    else:
        out.append(phi)


def _chain(op, items):
    if not items:
        return TRUE if op is And else FALSE
    acc = items[0]
    for x in items[1:]:
        acc = op(acc, x)
    return acc


def _junction(op, operands: list[Formula]) -> Formula:
    """Canonical n-ary conjunction/disjunction of already simplified operands."""
    dual = Or if op is And else And
    unit, zero = (TRUE, FALSE) if op is And else (FALSE, TRUE)
    flat: list[Formula] = []
    for x in operands:
        _flatten(op, x, flat)
    changed = True
    while changed:
        changed = False
        items: list[Formula] = []
        seen = set()
        for x in flat:
            if x == zero:
                return zero
            if x == unit or x in seen:
                continue
            seen.add(x)
            items.append(x)
        for x in items:
            if negate(x) in seen:
                return zero
        # absorption: x op (x dual y) -> x
        kept = []
        for x in items:
            if isinstance(x, dual):
                parts: list[Formula] = []
                _flatten(dual, x, parts)
                if any(p in seen for p in parts):
                    changed = True
                    continue
                # x op (!x dual y) -> x op y
                reduced = [p for p in parts if negate(p) not in seen]
                if len(reduced) < len(parts):
                    changed = True
                    kept.append(_junction(dual, reduced))
                    continue
            kept.append(x)
        items = kept
        items.sort(key=sort_key)
        rewritten = _pairwise(op, items)
        if rewritten is not None:
            flat = []
            for x in rewritten:
                _flatten(op, x, flat)
            changed = True
        else:
            flat = items
    if not flat:
        return unit
    return _chain(op, flat)


def _pairwise(op, items):
    """Rewrite one pair of operands, or None when no pair rule applies."""
    dual = Or if op is And else And
    for i in range(len(items)):
        for j in range(i + 1, len(items)):
            pair = op(items[i], items[j])
            for rule in _PAIR_RULES:
                if type(rule.lhs) is not op:
                    continue
                out = apply_rule(rule, pair)
                if out is not None:
                    rest = [x for k, x in enumerate(items) if k not in (i, j)]
                    return rest + [_simplify_node(out)]
            # factoring: (c & a) | (c & b) -> c & (a | b), and dually
            a_parts: list[Formula] = []
            b_parts: list[Formula] = []
            _flatten(dual, items[i], a_parts)
            _flatten(dual, items[j], b_parts)
            common = [x for x in a_parts if x in b_parts]
            if common and (len(a_parts) > 1 or len(b_parts) > 1):
                a_rest = [x for x in a_parts if x not in common]
                b_rest = [x for x in b_parts if x not in common]
                inner = _junction(op, [_junction(dual, a_rest), _junction(dual, b_rest)])
                out = _junction(dual, common + [inner])
                rest = [x for k, x in enumerate(items) if k not in (i, j)]
                return rest + [out]
    return None


def _simplify_node(phi: Formula) -> Formula:
    """Rewrite the root of ``phi`` (children already simplified) to a local fixpoint."""
    for _ in range(100):
        if isinstance(phi, Not):
            pushed = negate(phi.arg)
            if not isinstance(pushed, Not):
                phi = _simplify_node_children(pushed)
                continue
            return phi
        if isinstance(phi, (And, Or)):
            return _junction(type(phi), [phi.left, phi.right])
        for rule in _NODE_RULES:
            out = apply_rule(rule, phi)
            if out is not None:
                phi = _simplify_node_children(out)
                break
        else:
            return phi
    return phi


def _simplify_node_children(phi: Formula) -> Formula:
    if not phi.children:
        return phi
    return _simplify_node(rebuild(phi, [_simplify_node(c) for c in phi.children]))


@lru_cache(maxsize=50_000)
def _simplify(phi: Formula) -> Formula:
    if not phi.children:
        return phi
    return _simplify_node(rebuild(phi, [_simplify(c) for c in phi.children]))


def simplify(phi: Formula) -> Formula:
    """Equivalent formula that is no larger; qualitative input only."""
    if not is_qualitative(phi):
        raise ValueError("simplify only handles qualitative formulas (no X / WX)")
    best = phi
    current = phi
    for _ in range(50):
        nxt = _simplify(current)
        if formula_size(nxt) <= formula_size(best):
            best = nxt
        if nxt == current:
            break
        current = nxt
    return best
