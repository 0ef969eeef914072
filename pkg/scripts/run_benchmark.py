#!/usr/bin/env python3
"""Reproduce the full benchmark table: every task x architecture sweep.

Each cell sweeps seeds x learning rates, records the best and mean score,
and appends every run to a results JSONL file that `chomsky-bench report`
can summarize. Expect this to take a long time with the paper profile;
use --profile desk for a scaled-down version.
"""

import argparse
import itertools
import sys

from chomsky_bench.harness import PROFILES, append_results, resolve_config, sweep
from chomsky_bench.models import ARCHITECTURES
from chomsky_bench.tasks import TASK_IDS


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--profile", default="desk", choices=sorted(PROFILES))
    ap.add_argument("--tasks", default=",".join(TASK_IDS))
    ap.add_argument("--archs", default=",".join(ARCHITECTURES))
    ap.add_argument("--seeds", default="0,1,2,3,4")
    ap.add_argument("--lrs", default="1e-4,3e-4,5e-4")
    ap.add_argument("--results", default="results.jsonl")
    ap.add_argument("--curves-dir", default="curves")
    args = ap.parse_args()

    tasks = [t for t in args.tasks.split(",") if t]
    archs = [a for a in args.archs.split(",") if a]
    seeds = [int(s) for s in args.seeds.split(",")]
    lrs = [float(s) for s in args.lrs.split(",")]

    for task, arch in itertools.product(tasks, archs):
        cfg = resolve_config({"task": task, "arch": arch, "profile": args.profile})
        best, mean, std, records = sweep(cfg, seeds, lrs)
        append_results(records, args.results, args.curves_dir)
        if best is None:
            print(f"{task:<22} {arch:<12} all runs diverged", flush=True)
        else:
            mark = " **" if best.score >= 90.0 else ""
            print(f"{task:<22} {arch:<12} best {best.score:6.2f} "
                  f"mean {mean:6.2f} +/- {std:5.2f}{mark}", flush=True)
    return 0


if __name__ == "__main__":
    sys.exit(main())
