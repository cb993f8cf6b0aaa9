"""Labelled trace sets: sampling, padding, noise, and JSON-lines files."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .ltl import Formula, Trace, is_qualitative, to_text, valuation

log = logging.getLogger(__name__)

MAX_DRAWS_PER_CLASS = 1_000_000
UNIFORM_DRAWS = 20_000


class UnbalancedClassesError(RuntimeError):
    """Rejection sampling could not find enough traces of one class."""


@dataclass(frozen=True)
class LabeledTrace:
    trace: Trace
    label: bool


@dataclass(frozen=True)
class Dataset:
    props: tuple[str, ...]
    traces: tuple[LabeledTrace, ...]
    provenance: dict = field(default_factory=dict, compare=False)

    def __len__(self):
        return len(self.traces)

    @property
    def labels(self) -> np.ndarray:
        return np.array([lt.label for lt in self.traces], dtype=bool)

    @property
    def length(self) -> int:
        lengths = {len(lt.trace) for lt in self.traces}
        if len(lengths) != 1:
            raise ValueError(f"traces have mixed lengths {sorted(lengths)}")
        return lengths.pop()

    def array(self) -> np.ndarray:
        """Bool array of shape (N, T, |P|); traces must share one length."""
        self.length
        return np.array([lt.trace.steps for lt in self.traces], dtype=bool).reshape(
            len(self.traces), -1, len(self.props))

    def counts(self) -> tuple[int, int]:
        y = self.labels
        return int(y.sum()), int((~y).sum())

    def equals(self, other: "Dataset") -> bool:
        """Bit-exact comparison including provenance."""
        return self == other and self.provenance == other.provenance


def random_trace(props: Sequence[str], length: int, seed=None) -> Trace:
    """Every bit an independent fair coin."""
    if length < 1:
        raise ValueError("trace length must be at least 1")
    rng = np.random.default_rng(seed)
    bits = rng.integers(0, 2, size=(length, len(props))).astype(bool)
    return Trace(tuple(props), tuple(map(tuple, bits.tolist())))


def pad_stutter(trace: Trace, target_length: int) -> Trace:
    """Repeat the last assignment until the trace has ``target_length`` steps."""
    if len(trace) > target_length:
        raise ValueError(f"trace of length {len(trace)} exceeds target {target_length}")
    return Trace(trace.props, trace.steps + (trace.steps[-1],) * (target_length - len(trace)))


def label_traces(phi: Formula, steps: np.ndarray, props: Sequence[str]) -> np.ndarray:
    return valuation(phi, steps, props)[:, 0]


def _stutter_batch(bits: np.ndarray, lengths: np.ndarray) -> np.ndarray:
    T = bits.shape[1]
    idx = np.minimum(np.arange(T)[None, :], lengths[:, None] - 1)
    return bits[np.arange(len(bits))[:, None], idx]


def build_dataset(phi: Formula, props: Sequence[str], n_pos: int, n_neg: int, length: int,
                  char_sample: Iterable[tuple[Trace, bool]] = (), seed=None,
                  max_draws: int = MAX_DRAWS_PER_CLASS,
                  uniform_draws: int = UNIFORM_DRAWS) -> Dataset:
    """Padded characteristic sample topped up with random traces to exact class counts.

    Random traces are uniform at full length for the first ``uniform_draws``
    draws; a class still short after that is filled from traces of uniformly
    random length 1..T stutter-padded to T (label-preserving for qualitative
    formulas). If the characteristic sample alone holds more traces of a
    class than requested, a seeded random subset of it is kept.
    """
    if not is_qualitative(phi):
        raise ValueError("padding is only label-preserving for qualitative formulas")
    props = tuple(props)
    rng = np.random.default_rng(seed)

    char = [(pad_stutter(t, length), lab) for t, lab in char_sample if len(t) <= length]
    if char:
        arr = np.array([t.steps for t, _ in char], dtype=bool)
        truth = label_traces(phi, arr, props)
        for (t, lab), ok in zip(char, truth):
            if bool(ok) != bool(lab):
                raise ValueError(f"characteristic trace label disagrees with formula: {t}")
    pos = [t for t, lab in char if lab]
    neg = [t for t, lab in char if not lab]
    dropped = 0
    if len(pos) > n_pos:
        dropped += len(pos) - n_pos
        pos = [pos[i] for i in sorted(rng.choice(len(pos), n_pos, replace=False))]
    if len(neg) > n_neg:
        dropped += len(neg) - n_neg
        neg = [neg[i] for i in sorted(rng.choice(len(neg), n_neg, replace=False))]
    if dropped:
        log.warning("characteristic sample larger than class quota; kept a random subset (%d dropped)", dropped)
    n_char = len(pos) + len(neg)

    need_pos, need_neg = n_pos - len(pos), n_neg - len(neg)
    draws = found_pos = found_neg = 0
    batch = 512
    while need_pos > 0 or need_neg > 0:
        # a class that never shows up within its own budget is hopeless
        if draws >= max_draws * 2 or (draws >= max_draws and (
                (need_pos > 0 and found_pos == 0) or (need_neg > 0 and found_neg == 0))):
            raise UnbalancedClassesError(
                f"{to_text(phi)}: found only {n_pos - need_pos} positive / "
                f"{n_neg - need_neg} negative traces after {draws} draws")
        bits = rng.integers(0, 2, size=(batch, length, len(props))).astype(bool)
        if draws >= uniform_draws:
            bits = _stutter_batch(bits, rng.integers(1, length + 1, size=batch))
        draws += batch
        truth = label_traces(phi, bits, props)
        found_pos += int(truth.sum())
        found_neg += int((~truth).sum())
        for b, ok in zip(bits, truth):
            if ok and need_pos > 0:
                pos.append(Trace(props, tuple(map(tuple, b.tolist()))))
                need_pos -= 1
            elif not ok and need_neg > 0:
                neg.append(Trace(props, tuple(map(tuple, b.tolist()))))
                need_neg -= 1

    traces = [LabeledTrace(t, True) for t in pos] + [LabeledTrace(t, False) for t in neg]
    order = rng.permutation(len(traces))
    traces = tuple(traces[i] for i in order)
    provenance = {"target": to_text(phi), "seed": seed, "noise": 0.0,
                  "characteristic": n_char, "flipped": []}
    return Dataset(props, traces, provenance)


def inject_noise(d: Dataset, rate: float, seed=None) -> Dataset:
    """Flip the labels of floor(rate * |d|) distinct, uniformly chosen traces."""
    if not 0.0 <= rate <= 1.0:
        raise ValueError("noise rate must lie in [0, 1]")
    k = int(np.floor(rate * len(d) + 1e-9))
    rng = np.random.default_rng(seed)
    flips = sorted(int(i) for i in rng.choice(len(d), size=k, replace=False)) if k else []
    flip_set = set(flips)
    traces = tuple(
        LabeledTrace(lt.trace, not lt.label) if i in flip_set else lt
        for i, lt in enumerate(d.traces)
    )
    prov = dict(d.provenance)
    prov["noise"] = rate
    prov["flipped"] = flips
    return replace(d, traces=traces, provenance=prov)


# ---------------------------------------------------------------------------
# JSON-lines files

def write_dataset(d: Dataset, path) -> None:
    header = {"props": list(d.props), "target": d.provenance.get("target"),
              "seed": d.provenance.get("seed"), "noise": d.provenance.get("noise", 0.0)}
    extra = {k: v for k, v in d.provenance.items() if k not in header}
    if extra:
        header["provenance"] = extra
    with open(path, "w") as fh:
        fh.write(json.dumps(header) + "\n")
        for lt in d.traces:
            fh.write(json.dumps({"label": int(lt.label),
                                 "steps": [[int(b) for b in s] for s in lt.trace.steps]}) + "\n")


def read_dataset(path) -> Dataset:
    with open(path) as fh:
        header = json.loads(fh.readline())
        props = tuple(header["props"])
        traces = []
        for line in fh:
            if not line.strip():
                continue
            row = json.loads(line)
            traces.append(LabeledTrace(Trace.of(props, row["steps"]), bool(row["label"])))
    provenance = {"target": header.get("target"), "seed": header.get("seed"),
                  "noise": header.get("noise", 0.0)}
    provenance.update(header.get("provenance", {}))
    return Dataset(props, tuple(traces), provenance)
