"""Command-line entry point: ``neuralltlf <subcommand> ...``."""
from __future__ import annotations

import argparse
import json
import logging
import sys

from .automata import characteristic_sample, formula_to_dfa
from .baseline import SearchBudget, exact_learner, max_accuracy_learner
from .data import build_dataset, inject_noise, read_dataset, write_dataset
from .experiment import (
    COLUMN_DOC, RESULT_COLUMNS, ExperimentConfig, read_results,
    run_experiment, run_learn, summarize, write_results,
)
from .extract import network_to_formula
from .generate import random_formulas
from .ltl import formula_size, is_qualitative, parse, to_text, valuation
from .neural import (
    TrainConfig, classification_metrics, init_network, load_checkpoint, save_checkpoint, train,
)


def _props(text: str) -> tuple[str, ...]:
    return tuple(p.strip() for p in text.split(",") if p.strip())


def _arch(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.replace("->", ",").split(",") if x.strip())


def _sizes(text: str) -> tuple[int, ...]:
    if "-" in text:
        lo, hi = text.split("-")
        return tuple(range(int(lo), int(hi) + 1))
    return tuple(int(x) for x in text.split(","))


def _emit(doc, out=None) -> None:
    text = json.dumps(doc, indent=2)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _train_config(args) -> TrainConfig:
    return TrainConfig(learning_rate=args.lr, batch_size=args.batch_size, max_epochs=args.epochs,
                       seed=args.seed, time_budget=args.budget)


def _experiment_config(args) -> ExperimentConfig:
    doc: dict = {}
    if args.config:
        with open(args.config) as fh:
            doc = json.load(fh)
    overrides = {
        "sizes": args.sizes, "formulas_per_size": args.per_size, "props": args.props,
        "length": args.length, "n_train": args.n_train, "n_test": args.n_test,
        "noise": args.noise, "time_budget": args.budget, "architectures": args.arch,
        "restarts": args.restarts, "size_threshold": args.threshold, "seed": args.seed,
        "baselines": args.baselines, "baseline_time": args.baseline_time, "workers": args.workers,
    }
    doc.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig.from_dict(doc)


# ---------------------------------------------------------------------------
# subcommands

def cmd_gen_formulas(args) -> int:
    for size in args.sizes:
        for phi in random_formulas(args.count, size, args.props, seed=args.seed + size):
            print(to_text(phi))
    return 0


def cmd_gen_data(args) -> int:
    phi = parse(args.formula, args.props)
    sample = [] if args.no_char_sample else characteristic_sample(formula_to_dfa(phi, args.props),
                                                                   args.length)
    d = build_dataset(phi, args.props, args.n_pos, args.n_neg, args.length, sample, seed=args.seed)
    if args.noise:
        d = inject_noise(d, args.noise, seed=args.seed + 1)
    write_dataset(d, args.out)
    pos, neg = d.counts()
    print(f"wrote {len(d)} traces ({pos} positive, {neg} negative) to {args.out}", file=sys.stderr)
    return 0


def cmd_train(args) -> int:
    d = read_dataset(args.data)
    net = init_network(d.props, args.arch, seed=args.seed)
    res = train(net, d, _train_config(args))
    save_checkpoint(res.network, args.out, epoch=res.best_epoch, seed=args.seed)
    if args.log:
        res.write_log(args.log)
    _emit({"status": res.status, "epochs": len(res.log), "best_epoch": res.best_epoch,
           "best_hard_accuracy": res.best_hard_accuracy, "elapsed": res.elapsed})
    return 0


def cmd_extract(args) -> int:
    net, _ = load_checkpoint(args.checkpoint)
    _emit(network_to_formula(net).to_dict(), args.report)
    return 0


def cmd_learn(args) -> int:
    d = read_dataset(args.data)
    cfg = _experiment_config(args)
    res = run_learn(d, cfg)
    _emit(res.report(), args.report)
    if args.report:
        print(to_text(res.formula))
    return 0


def cmd_baseline(args) -> int:
    d = read_dataset(args.data)
    budget = SearchBudget(max_size=args.max_size, time_limit=args.time)
    learner = exact_learner if args.method == "exact" else max_accuracy_learner
    r = learner(d, budget)
    _emit({"method": args.method, "status": r.status,
           "formula": None if r.formula is None else to_text(r.formula),
           "size": r.size, "accuracy": r.accuracy, "searched_size": r.searched_size,
           "candidates": r.candidates, "elapsed": r.elapsed})
    return 0 if r.formula is not None else 2


def cmd_experiment(args) -> int:
    cfg = _experiment_config(args)
    if args.dump_config:
        _emit(cfg.to_dict())
        return 0

    def progress(rows):
        for r in rows:
            print(f"[size {r['target_size']} #{r['index']}] {r['method']}: {r['formula']} "
                  f"(test acc {r['test_accuracy']})", file=sys.stderr)

    rows = run_experiment(cfg, progress)
    write_results(rows, args.out)
    if args.summary:
        _emit({"config": cfg.to_dict(), "summary": summarize(rows),
               "by_size": summarize(rows, by_size=True)}, args.summary)
    return 0


def cmd_eval(args) -> int:
    d = read_dataset(args.data)
    phi = parse(args.formula, d.props)
    pred = valuation(phi, d.array(), d.props)[:, 0]
    m = classification_metrics(pred, d.labels)
    _emit({"formula": to_text(phi), "size": formula_size(phi), "qualitative": is_qualitative(phi),
           "accuracy": m.accuracy, "precision": m.precision, "recall": m.recall})
    return 0


def cmd_report(args) -> int:
    if args.schema:
        for c in RESULT_COLUMNS:
            print(f"{c}: {COLUMN_DOC[c]}")
        return 0
    if not args.results:
        print("report needs --results or --schema", file=sys.stderr)
        return 2
    rows = read_results(args.results)
    _emit({"summary": summarize(rows), "by_size": summarize(rows, by_size=True)}, args.out)
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="neuralltlf", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, seed_default=0):
        p.add_argument("--seed", type=int, default=seed_default)
        return p

    p = common(sub.add_parser("gen-formulas", help="random qualitative target formulas"))
    p.add_argument("--sizes", type=_sizes, default=(2, 3, 4, 5, 6))
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--props", type=_props, default=("a", "b", "c"))
    p.set_defaults(func=cmd_gen_formulas)

    p = common(sub.add_parser("gen-data", help="labelled dataset for one formula"))
    p.add_argument("--formula", required=True)
    p.add_argument("--props", type=_props, default=("a", "b", "c"))
    p.add_argument("--n-pos", type=int, default=100)
    p.add_argument("--n-neg", type=int, default=100)
    p.add_argument("--length", type=int, default=15)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--no-char-sample", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_data)

    p = common(sub.add_parser("train", help="train one network"))
    p.add_argument("--data", required=True)
    p.add_argument("--arch", type=_arch, default=(1,))
    p.add_argument("--lr", type=float, default=TrainConfig.learning_rate)
    p.add_argument("--batch-size", type=int, default=TrainConfig.batch_size)
    p.add_argument("--epochs", type=int, default=TrainConfig.max_epochs)
    p.add_argument("--budget", type=float, default=None, help="wall-clock seconds")
    p.add_argument("--out", required=True, help="checkpoint file")
    p.add_argument("--log", help="training log CSV")
    p.set_defaults(func=cmd_train)

    p = common(sub.add_parser("extract", help="formula from a checkpoint"))
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--report")
    p.set_defaults(func=cmd_extract)

    def experiment_flags(p):
        p.add_argument("--config", help="JSON file with experiment settings")
        p.add_argument("--sizes", type=_sizes)
        p.add_argument("--per-size", type=int)
        p.add_argument("--props", type=_props)
        p.add_argument("--length", type=int)
        p.add_argument("--n-train", type=int)
        p.add_argument("--n-test", type=int)
        p.add_argument("--noise", type=float)
        p.add_argument("--budget", type=float, help="seconds per target")
        p.add_argument("--arch", type=_arch, action="append")
        p.add_argument("--restarts", type=int)
        p.add_argument("--threshold", type=int)
        p.add_argument("--baselines", type=lambda s: tuple(x for x in s.split(",") if x))
        p.add_argument("--baseline-time", type=float)
        p.add_argument("--workers", type=int)
        p.add_argument("--seed", type=int)

    p = sub.add_parser("learn", help="train all architectures on a dataset and select a formula")
    p.add_argument("--data", required=True)
    p.add_argument("--report")
    experiment_flags(p)
    p.set_defaults(func=cmd_learn)

    p = common(sub.add_parser("baseline", help="enumerative learners"))
    p.add_argument("--data", required=True)
    p.add_argument("--method", choices=("exact", "max_accuracy"), default="exact")
    p.add_argument("--max-size", type=int, default=10)
    p.add_argument("--time", type=float, default=60.0)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("experiment", help="full sweep, results CSV")
    experiment_flags(p)
    p.add_argument("--out", required=True, help="results CSV")
    p.add_argument("--summary", help="JSON summary with confidence intervals")
    p.add_argument("--dump-config", action="store_true")
    p.set_defaults(func=cmd_experiment)

    p = common(sub.add_parser("eval", help="score a formula on a dataset"))
    p.add_argument("--formula", required=True)
    p.add_argument("--data", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="summarise a results CSV")
    p.add_argument("--results")
    p.add_argument("--schema", action="store_true", help="print the results CSV columns")
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
