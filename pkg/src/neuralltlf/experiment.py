"""Learning pipeline and experiment sweeps.

``run_learn`` trains several architectures on one dataset, extracts a
formula from each and picks one. ``run_experiment`` draws random target
formulas, builds train/test sets for each and runs the neural learner plus
the enumerative baselines, producing one CSV row per (target, method).
"""
from __future__ import annotations

import csv
import logging
import math
import random
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .automata import characteristic_sample, equivalent_formulas, formula_to_dfa
from .baseline import SearchBudget, exact_learner, max_accuracy_learner
from .data import Dataset, build_dataset, inject_noise
from .extract import network_to_formula
from .generate import random_formula
from .ltl import FALSE, TRUE, Formula, formula_size, parse, to_text, valuation
from .neural import TrainConfig, classification_metrics, init_network, train

log = logging.getLogger(__name__)

RESULT_COLUMNS = (
    "target", "target_size", "index", "method", "formula", "formula_size",
    "train_accuracy", "test_accuracy", "precision", "recall", "equivalent",
    "runtime", "timeout", "fallback", "raw_size", "minimized_size", "final_size",
    "error",
)

COLUMN_DOC = {
    "target": "target formula text",
    "target_size": "size of the target formula",
    "index": "position of the target among those of its size",
    "method": "neural | exact | max_accuracy",
    "formula": "learned formula text (true when a baseline timed out)",
    "formula_size": "size of the learned formula",
    "train_accuracy": "accuracy of the learned formula on the (possibly noisy) training set",
    "test_accuracy": "accuracy on the clean test set",
    "precision": "test-set precision (1.0 when nothing is predicted positive)",
    "recall": "test-set recall (1.0 when the test set has no positives)",
    "equivalent": "1 if the learned formula is language-equivalent to the target",
    "runtime": "learner wall-clock seconds",
    "timeout": "1 if the learner ran out of budget",
    "fallback": "neural only: 1 if every candidate exceeded the size threshold",
    "raw_size": "neural only: size of the composed unminimised TNF formula",
    "minimized_size": "neural only: size after two-level minimisation",
    "final_size": "neural only: size after rewriting",
    "error": "failure message when the target could not be processed",
}


def derive_seed(master: int, *keys: int) -> int:
    """Independent 63-bit seed for one cell of the sweep."""
    state = np.random.SeedSequence([master, *keys]).generate_state(2, np.uint32)
    return int((int(state[0]) << 31) ^ int(state[1]))


@dataclass
class ExperimentConfig:
    sizes: tuple[int, ...] = (2, 3, 4, 5, 6)
    formulas_per_size: int = 10
    props: tuple[str, ...] = ("a", "b", "c")
    length: int = 15
    n_train: int = 200                 # split evenly between the classes
    n_test: int = 200
    noise: float = 0.0
    time_budget: float = 120.0         # seconds per target for the neural learner
    architectures: tuple[tuple[int, ...], ...] = ((1,), (3, 1), (5, 5, 1))
    restarts: int = 1
    train: TrainConfig = field(default_factory=TrainConfig)
    size_threshold: int = 25
    seed: int = 0
    baselines: tuple[str, ...] = ("exact", "max_accuracy")
    baseline_time: float = 20.0
    baseline_max_size: int = 10
    workers: int = 1

    def __post_init__(self):
        self.sizes = tuple(self.sizes)
        self.props = tuple(self.props)
        self.architectures = tuple(tuple(a) for a in self.architectures)
        self.baselines = tuple(self.baselines)
        if isinstance(self.train, dict):
            self.train = TrainConfig(**self.train)
        for name in ("formulas_per_size", "length", "n_train", "n_test", "restarts"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.n_train % 2 or self.n_test % 2:
            raise ValueError("dataset sizes must be even (balanced classes)")
        for arch in self.architectures:
            if not arch or arch[-1] != 1:
                raise ValueError(f"architecture {arch} must end in a single filter")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        return cls(**doc)


# ---------------------------------------------------------------------------
# one dataset

@dataclass
class Candidate:
    arch: tuple[int, ...]
    restart: int
    formula: Formula
    train_accuracy: float
    size: int
    status: str
    epochs: int
    best_hard_accuracy: float
    extraction: dict

    def summary(self) -> dict:
        return {"arch": list(self.arch), "restart": self.restart, "formula": to_text(self.formula),
                "train_accuracy": self.train_accuracy, "size": self.size, "status": self.status,
                "epochs": self.epochs, "best_hard_accuracy": self.best_hard_accuracy,
                "extraction": self.extraction}


@dataclass
class LearnResult:
    formula: Formula
    train_accuracy: float
    fallback: bool
    candidates: list[Candidate]
    selected: Candidate
    elapsed: float
    timed_out: bool

    def report(self) -> dict:
        return {"formula": to_text(self.formula), "size": formula_size(self.formula),
                "train_accuracy": self.train_accuracy, "fallback": self.fallback,
                "elapsed": self.elapsed, "timed_out": self.timed_out,
                "selected": self.selected.summary(),
                "candidates": [c.summary() for c in self.candidates]}


def formula_accuracy(phi: Formula, data: Dataset) -> float:
    pred = valuation(phi, data.array(), data.props)[:, 0]
    return float((pred == data.labels).mean())


def run_learn(data: Dataset, cfg: ExperimentConfig, seed: int | None = None,
              logs: dict | None = None) -> LearnResult:
    """Train every architecture x restart, extract, and select one formula.

    The time budget is shared: each run may use the remaining budget divided
    by the number of runs still to go, so time left over by a run that
    converges early passes to the later ones. Selection keeps formulas no
    larger than the size threshold and takes the highest training accuracy,
    then the smallest size, then the lexicographically first text; if every
    formula is too large the smallest one is returned and flagged.
    """
    seed = cfg.seed if seed is None else seed
    start = time.monotonic()
    end = start + cfg.time_budget
    runs = [(arch, r) for arch in cfg.architectures for r in range(cfg.restarts)]
    candidates: list[Candidate] = []
    timed_out = False
    for k, (arch, r) in enumerate(runs):
        now = time.monotonic()
        deadline = now + max(0.0, end - now) / (len(runs) - k)
        run_seed = derive_seed(seed, k)
        net = init_network(data.props, arch, seed=run_seed, qualitative=True)
        tcfg = TrainConfig(**{**asdict(cfg.train), "seed": run_seed})
        res = train(net, data, tcfg, deadline=deadline)
        timed_out |= res.status == "budget_exhausted"
        if logs is not None:
            logs[(arch, r)] = res.log
        rep = network_to_formula(res.network)
        phi = rep.formula
        candidates.append(Candidate(arch, r, phi, formula_accuracy(phi, data), formula_size(phi),
                                    res.status, len(res.log), res.best_hard_accuracy, rep.to_dict()))
    kept = [c for c in candidates if c.size <= cfg.size_threshold]
    fallback = not kept
    if fallback:
        selected = min(candidates, key=lambda c: (c.size, to_text(c.formula)))
    else:
        selected = min(kept, key=lambda c: (-c.train_accuracy, c.size, to_text(c.formula)))
    return LearnResult(selected.formula, selected.train_accuracy, fallback, candidates, selected,
                       time.monotonic() - start, timed_out)


# ---------------------------------------------------------------------------
# sweeps

def make_datasets(target: Formula, cfg: ExperimentConfig, cell_seed: int) -> tuple[Dataset, Dataset]:
    """Training set (noisy if configured) and clean test set sharing the characteristic sample."""
    sample = characteristic_sample(formula_to_dfa(target, cfg.props), cfg.length)
    h_train, h_test = cfg.n_train // 2, cfg.n_test // 2
    train_set = build_dataset(target, cfg.props, h_train, h_train, cfg.length, sample,
                              seed=derive_seed(cell_seed, 1))
    test_set = build_dataset(target, cfg.props, h_test, h_test, cfg.length, sample,
                             seed=derive_seed(cell_seed, 2))
    if cfg.noise > 0:
        train_set = inject_noise(train_set, cfg.noise, seed=derive_seed(cell_seed, 3))
    return train_set, test_set


def is_trivial(phi: Formula, props: Sequence[str]) -> bool:
    """True if ``phi`` is valid or unsatisfiable (no balanced dataset exists)."""
    return bool(equivalent_formulas(phi, TRUE, props)) or bool(equivalent_formulas(phi, FALSE, props))


def targets_for(cfg: ExperimentConfig) -> list[tuple[int, int, Formula]]:
    """Distinct random targets per size, skipping valid and unsatisfiable ones."""
    out = []
    for size in cfg.sizes:
        rng = random.Random(derive_seed(cfg.seed, 0, size))
        phis: list[Formula] = []
        for _ in range(10_000):
            if len(phis) == cfg.formulas_per_size:
                break
            phi = random_formula(size, cfg.props, True, rng)
            if phi not in phis and not is_trivial(phi, cfg.props):
                phis.append(phi)
        out += [(size, i, phi) for i, phi in enumerate(phis)]
    return out


def _row(target, size, index, method, phi, train_set, test_set, runtime, timeout, **extra) -> dict:
    pred = valuation(phi, test_set.array(), test_set.props)[:, 0]
    m = classification_metrics(pred, test_set.labels)
    row = {"target": to_text(target), "target_size": size, "index": index, "method": method,
           "formula": to_text(phi), "formula_size": formula_size(phi),
           "train_accuracy": formula_accuracy(phi, train_set), "test_accuracy": m.accuracy,
           "precision": m.precision, "recall": m.recall,
           "equivalent": int(bool(equivalent_formulas(target, phi, test_set.props))),
           "runtime": round(runtime, 3), "timeout": int(timeout), "fallback": "",
           "raw_size": "", "minimized_size": "", "final_size": "", "error": ""}
    row.update(extra)
    return row


def run_cell(cfg: ExperimentConfig, size: int, index: int, target: Formula) -> list[dict]:
    """All methods on one target; failures become error rows."""
    cell_seed = derive_seed(cfg.seed, 1, size, index)
    try:
        train_set, test_set = make_datasets(target, cfg, cell_seed)
    except Exception as exc:  # recorded, never fatal for the sweep
        log.warning("dataset for %s failed: %s", to_text(target), exc)
        return [{**{c: "" for c in RESULT_COLUMNS}, "target": to_text(target), "target_size": size,
                 "index": index, "method": "neural", "error": f"{type(exc).__name__}: {exc}"}]
    rows = []
    try:
        res = run_learn(train_set, cfg, seed=derive_seed(cell_seed, 4))
        ext = res.selected.extraction
        rows.append(_row(target, size, index, "neural", res.formula, train_set, test_set,
                         res.elapsed, res.timed_out, fallback=int(res.fallback),
                         raw_size=ext["raw_size"], minimized_size=ext["minimized_size"],
                         final_size=ext["final_size"]))
    except Exception as exc:
        log.exception("neural learner failed on %s", to_text(target))
        rows.append({**{c: "" for c in RESULT_COLUMNS}, "target": to_text(target),
                     "target_size": size, "index": index, "method": "neural",
                     "error": f"{type(exc).__name__}: {exc}"})
    budget = SearchBudget(max_size=cfg.baseline_max_size, time_limit=cfg.baseline_time)
    for method in cfg.baselines:
        learner = {"exact": exact_learner, "max_accuracy": max_accuracy_learner}[method]
        r = learner(train_set, budget)
        phi = r.formula if r.formula is not None else TRUE
        timeout = r.status != "found" if method == "exact" else r.status == "timeout"
        rows.append(_row(target, size, index, method, phi, train_set, test_set, r.elapsed, timeout,
                         error="" if r.formula is not None else r.status))
    return rows


def _cell_args(args):
    return run_cell(*args)


def run_experiment(cfg: ExperimentConfig, progress=None) -> list[dict]:
    cells = [(cfg, size, i, phi) for size, i, phi in targets_for(cfg)]
    rows: list[dict] = []
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            for out in pool.map(_cell_args, cells):
                rows += out
                if progress:
                    progress(out)
    else:
        for cell in cells:
            out = run_cell(*cell)
            rows += out
            if progress:
                progress(out)
    rows.sort(key=lambda r: (int(r["target_size"]), int(r["index"]), r["method"]))
    return rows


# ---------------------------------------------------------------------------
# results files and summaries

def write_results(rows: Sequence[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=RESULT_COLUMNS)
        w.writeheader()
        for r in rows:
            w.writerow({k: r.get(k, "") for k in RESULT_COLUMNS})


def read_results(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def mean_ci(values: Sequence[float], z: float = 1.96) -> tuple[float, float]:
    """Mean and normal-approximation half-width."""
    v = np.asarray(values, dtype=float)
    if len(v) == 0:
        return math.nan, math.nan
    if len(v) == 1:
        return float(v[0]), 0.0
    return float(v.mean()), float(z * v.std(ddof=1) / math.sqrt(len(v)))


def summarize(rows: Sequence[dict], by_size: bool = False) -> list[dict]:
    """Per method (and optionally per target size) means with 95% intervals."""
    groups: dict = {}
    for r in rows:
        if r.get("error") and r.get("formula", "") == "":
            continue
        key = (r["method"], int(r["target_size"])) if by_size else (r["method"],)
        groups.setdefault(key, []).append(r)
    out = []
    for key, rs in sorted(groups.items()):
        acc = [float(r["test_accuracy"]) for r in rs]
        size = [float(r["formula_size"]) for r in rs]
        m_acc, ci_acc = mean_ci(acc)
        m_size, ci_size = mean_ci(size)
        row = {"method": key[0], "n": len(rs), "test_accuracy": m_acc, "test_accuracy_ci": ci_acc,
               "perfect_fraction": float(np.mean([a == 1.0 for a in acc])),
               "formula_size": m_size, "formula_size_ci": ci_size,
               "precision": float(np.mean([float(r["precision"]) for r in rs])),
               "recall": float(np.mean([float(r["recall"]) for r in rs])),
               "timeout_fraction": float(np.mean([int(r["timeout"]) for r in rs])),
               "equivalent_fraction": float(np.mean([int(r["equivalent"]) for r in rs]))}
        if by_size:
            row["target_size"] = key[1]
        out.append(row)
    return out


def recompute_accuracy(row: dict, test_set: Dataset) -> float:
    return formula_accuracy(parse(row["formula"], test_set.props), test_set)
