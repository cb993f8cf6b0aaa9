#!/usr/bin/env python3
"""Desk-scale learning sweep: clean and 1%-noise settings.

    python3 scripts/run_experiment.py --out results/            # both settings
    python3 scripts/run_experiment.py --setting clean --per-size 3 --budget 30

Writes <setting>.csv (one row per target and method) and <setting>.json
(config plus summaries with 95% intervals) into the output directory.
"""
import argparse
import json
import sys
import time
from pathlib import Path

from neuralltlf.experiment import ExperimentConfig, run_experiment, summarize, write_results

SETTINGS = {
    "clean": dict(noise=0.0, baselines=()),
    "noisy": dict(noise=0.01, baselines=("exact", "max_accuracy")),
}


def config_for(setting: str, **overrides) -> ExperimentConfig:
    doc = dict(SETTINGS[setting])
    doc.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(**doc)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--setting", choices=sorted(SETTINGS), action="append")
    ap.add_argument("--out", default="results")
    ap.add_argument("--per-size", type=int)
    ap.add_argument("--budget", type=float)
    ap.add_argument("--baseline-time", type=float)
    ap.add_argument("--seed", type=int)
    args = ap.parse_args(argv)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for setting in args.setting or ["clean", "noisy"]:
        cfg = config_for(setting, formulas_per_size=args.per_size, time_budget=args.budget,
                         baseline_time=args.baseline_time, seed=args.seed)
        start = time.monotonic()

        def progress(rows):
            for r in rows:
                print(f"{setting} size {r['target_size']} #{r['index']} {r['method']:>12}: "
                      f"{r['formula'] or r['error']}  test={r['test_accuracy']}", flush=True)

        rows = run_experiment(cfg, progress)
        write_results(rows, out / f"{setting}.csv")
        doc = {"config": cfg.to_dict(), "elapsed": time.monotonic() - start,
               "summary": summarize(rows), "by_size": summarize(rows, by_size=True)}
        (out / f"{setting}.json").write_text(json.dumps(doc, indent=2) + "\n")
        for s in doc["summary"]:
            print(json.dumps(s), flush=True)
    return 0


if __name__ == "__main__":
    sys.exit(main())
