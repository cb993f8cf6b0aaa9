"""From trained filters to formulas: temporal truth tables, TNF, composition.

A filter with n inputs is discretised into a table over 2n+1 bits. Row
index bit j (j < n) is the input x_j at the current step, bit n+j is the
metric bit m_j (x_j one step later), and bit 2n is the temporal bit tau
(the filter's own value one step later).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .logicmin import Cover, minimize_cover
from .ltl import (
    FALSE, TRUE, And, Eventually, Formula, Globally, Next, Not, Or, Prop,
    Until, WeakNext, WeakUntil, formula_size, to_text,
)
from .neural import Network
from .simplify import simplify

MAX_TABLE_BITS = 24


@dataclass(frozen=True)
class TemporalTruthTable:
    n: int
    f: np.ndarray                 # bool, length 2**(2n+1)
    Omega: bool
    omega: tuple[bool, ...]
    qualitative: bool = False     # metric bits are don't-cares

    def __post_init__(self):
        if len(self.f) != 1 << (2 * self.n + 1):
            raise ValueError(f"table for n={self.n} needs {1 << (2 * self.n + 1)} rows, got {len(self.f)}")
        if len(self.omega) != self.n:
            raise ValueError("omega needs one bit per input")

    @property
    def dc(self) -> np.ndarray | None:
        """Rows whose value is irrelevant: any row with a metric bit set, in qualitative mode."""
        if not self.qualitative:
            return None
        rows = np.arange(len(self.f))
        return (rows >> self.n) & ((1 << self.n) - 1) != 0

    def value(self, x: Sequence[int], m: Sequence[int], tau: int) -> bool:
        return bool(self.f[row_index(x, m, tau)])

    def rows(self, tau: int) -> np.ndarray:
        """f restricted to one tau value, indexed by (x, m) as 2n-bit integers."""
        half = 1 << (2 * self.n)
        return self.f[half:] if tau else self.f[:half]


def row_index(x: Sequence[int], m: Sequence[int], tau: int) -> int:
    n = len(x)
    k = sum(int(b) << j for j, b in enumerate(x))
    k |= sum(int(b) << (n + j) for j, b in enumerate(m))
    return k | (int(tau) << (2 * n))


def _bits(n: int) -> np.ndarray:
    rows = np.arange(1 << (2 * n + 1))
    return ((rows[:, None] >> np.arange(2 * n + 1)) & 1).astype(float)


def filter_to_table(net: Network, layer: int, i: int) -> TemporalTruthTable:
    """Discretise filter ``i`` of ``layer`` (0-based) into its temporal truth table."""
    p = net.layer(layer)
    n = net.width(layer)
    if 2 * n + 1 > MAX_TABLE_BITS:
        raise ValueError(f"table of {2 * n + 1} bits exceeds the limit of {MAX_TABLE_BITS}")
    wp, wm = p["wp"][i], p["wm"][i]
    wq = max(0.0, float(p["wq"][i]))
    bits = _bits(n)
    z = bits[:, :n] @ wp + bits[:, n:2 * n] @ wm + wq * bits[:, 2 * n] + p["b"][i]
    f = z >= 0
    Omega = bool(p["base"][i] >= 0)
    omega = tuple(bool(v >= 0) for v in net.input_base(layer))
    return TemporalTruthTable(n, f, Omega, omega, net.qualitative)


def validate_table(t: TemporalTruthTable) -> tuple[int, ...] | None:
    """None if f(x,m,0)=1 implies f(x,m,1)=1 everywhere, else the offending (x, m) bits."""
    bad = t.rows(0) & ~t.rows(1)
    if t.qualitative:
        bad = bad & ~t.dc[: len(bad)]
    if not bad.any():
        return None
    k = int(np.argmax(bad))
    return tuple((k >> j) & 1 for j in range(2 * t.n))


# ---------------------------------------------------------------------------
# TNF

@dataclass(frozen=True)
class TnfFormula:
    """phi U psi (or phi W psi) with phi, psi sums of products over x / m literals."""
    n: int
    phi: Cover
    psi: Cover
    weak: bool
    omega: tuple[bool, ...]
    literal_style: str = "exact"

    def to_formula(self, inputs: Sequence[Formula]) -> Formula:
        lit = lambda j, v: _literal(j, v, self.n, inputs, self.omega, self.literal_style)
        phi = _sop(self.phi, lit)
        psi = _sop(self.psi, lit)
        return (WeakUntil if self.weak else Until)(phi, psi)

    def folded(self, inputs: Sequence[Formula]) -> Formula:
        """``to_formula`` with constant operands folded away (never larger)."""
        lit = lambda j, v: _literal(j, v, self.n, inputs, self.omega, self.literal_style)
        return fold_tnf(_sop(self.phi, lit), _sop(self.psi, lit), self.weak)


def _literal(j: int, value: int, n: int, inputs, omega, style) -> Formula:
    if j < n:
        return inputs[j] if value else Not(inputs[j])
    k = j - n
    x = inputs[k]
    strong = not omega[k]
    if value:
        return Next(x) if strong else WeakNext(x)
    if style == "prefix":
        return Next(Not(x)) if strong else WeakNext(Not(x))
    # exact complement of the metric bit: at the last step m_k is omega_k
    return WeakNext(Not(x)) if strong else Next(Not(x))


def _sop(cover: Cover, lit) -> Formula:
    if not cover.cubes:
        return FALSE
    terms = []
    for value, care in cover.cubes:
        lits = [lit(j, (value >> j) & 1) for j in range(cover.n) if (care >> j) & 1]
        terms.append(_chain(And, lits) if lits else TRUE)
    if TRUE in terms:
        return TRUE
    return _chain(Or, terms)


def _chain(op, items):
    acc = items[0]
    for x in items[1:]:
        acc = op(acc, x)
    return acc


def fold_tnf(phi: Formula, psi: Formula, weak: bool) -> Formula:
    """phi U psi / phi W psi with constant operands folded away (never larger)."""
    if psi == TRUE:
        return TRUE
    if phi == FALSE:
        return psi
    if psi == FALSE:
        if not weak:
            return FALSE
        return TRUE if phi == TRUE else Globally(phi)
    if phi == TRUE:
        return TRUE if weak else Eventually(psi)
    return (WeakUntil if weak else Until)(phi, psi)


def _tnf_covers(t: TemporalTruthTable, minimize: bool):
    """(phi cover, psi cover, variable count) over x bits, plus m bits unless qualitative."""
    on1, on0 = t.rows(1), t.rows(0)
    nv = t.n if t.qualitative else 2 * t.n
    if t.qualitative:
        # collapse metric bits: read the m = 0 slice
        on1, on0 = on1[: 1 << t.n], on0[: 1 << t.n]
    psi_on = [int(k) for k in np.flatnonzero(on0)]
    phi_all = [int(k) for k in np.flatnonzero(on1)]
    if not minimize:
        full = (1 << nv) - 1
        return Cover(tuple((k, full) for k in phi_all), nv), Cover(tuple((k, full) for k in psi_on), nv), nv
    # where psi holds, phi is irrelevant
    psi_set = set(psi_on)
    phi_on = [k for k in phi_all if k not in psi_set]
    return minimize_cover(phi_on, psi_set, nv), minimize_cover(psi_on, (), nv), nv


def table_to_formula(t: TemporalTruthTable, minimize: bool = True,
                     literal_style: str = "exact") -> TnfFormula:
    """TNF for a valid table: phi from tau=1 rows, psi from tau=0 rows, W iff Omega.

    With ``minimize`` the two sums of products are minimised (psi's onset is a
    don't-care for phi); without it every row becomes a full clause.
    ``literal_style="prefix"`` writes a cleared metric bit as X !x / WX !x
    (the same prefix as a set bit); the default writes its exact complement.
    """
    if validate_table(t) is not None:
        raise ValueError(f"invalid temporal truth table at pattern {validate_table(t)}")
    if literal_style not in ("exact", "prefix"):
        raise ValueError(f"unknown literal style {literal_style!r}")
    phi, psi, nv = _tnf_covers(t, minimize)
    return TnfFormula(t.n, phi, psi, t.Omega, t.omega, literal_style)


def raw_tnf_size(t: TemporalTruthTable, input_sizes: Sequence[int]) -> int:
    """Size of the unminimised TNF with each x_j standing for a formula of ``input_sizes[j]``."""
    nv = t.n if t.qualitative else 2 * t.n
    # one clause: every variable once (metric literals add an X/WX node)
    clause = sum(input_sizes) * (1 if t.qualitative else 2) + (nv - 1)
    if not t.qualitative:
        clause += t.n
    total = 1
    for tau in (1, 0):
        rows = t.rows(tau)
        c = int(rows[: 1 << t.n].sum()) if t.qualitative else int(rows.sum())
        if c:
            total += c * clause + (c - 1)
    return total


# ---------------------------------------------------------------------------
# whole networks

@dataclass
class ExtractionReport:
    formula: Formula
    raw_size: int
    minimized_size: int
    final_size: int
    filters: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"formula": to_text(self.formula), "raw_size": self.raw_size,
                "minimized_size": self.minimized_size, "final_size": self.final_size,
                "filters": self.filters}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def network_to_formula(net: Network, literal_style: str = "exact",
                       run_simplify: bool = True) -> ExtractionReport:
    """Extract every filter bottom-up and substitute each layer into the next.

    Stage sizes: ``raw_size`` composes the unminimised TNFs (computed
    arithmetically, it can be astronomically large), ``minimized_size``
    composes the minimised, constant-folded TNFs, and ``final_size`` is after
    rewriting (qualitative networks only).
    """
    inputs: list[Formula] = [Prop(p) for p in net.props]
    raw_sizes = [1] * len(net.props)
    filters = []
    for l in range(net.n_layers):
        outs, outs_raw = [], []
        for i in range(net.arch[l]):
            t = filter_to_table(net, l, i)
            tnf = table_to_formula(t, True, literal_style)
            phi = tnf.folded(inputs)
            raw = raw_tnf_size(t, raw_sizes)
            outs.append(phi)
            outs_raw.append(raw)
            filters.append({"layer": l, "filter": i, "weak": t.Omega,
                            "phi_cubes": tnf.phi.cube_strings(), "psi_cubes": tnf.psi.cube_strings(),
                            "formula": to_text(phi)})
        inputs, raw_sizes = outs, outs_raw
    composed = inputs[0]
    minimized_size = formula_size(composed)
    final = simplify(composed) if run_simplify and net.qualitative else composed
    return ExtractionReport(final, raw_sizes[0], minimized_size, formula_size(final), filters)
