#!/usr/bin/env python3
"""Inspect what a model computes on one sequence: record a trace, export the
CSV bundle, and summarize the hidden-state geometry (top principal components
and single-linkage cluster count).
"""

import argparse
import sys

import numpy as np

from chomsky_bench.harness import (build_batch, load_checkpoint,
                                   make_model_config, resolve_config,
                                   token_layout)
from chomsky_bench.introspection import (export_trace, pca, record_trace,
                                         single_linkage_clusters)
from chomsky_bench.models import build_model
from chomsky_bench.tasks import get_task


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--task", required=True)
    ap.add_argument("--arch", required=True)
    ap.add_argument("--hidden", type=int, default=64)
    ap.add_argument("--length", type=int, default=8)
    ap.add_argument("--checkpoint", help="load trained parameters")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--radius", type=float, default=0.1,
                    help="cluster linkage radius in PCA space")
    ap.add_argument("--out", default="trace_out")
    args = ap.parse_args()

    cfg = resolve_config({"task": args.task, "arch": args.arch,
                          "hidden": args.hidden, "seed": args.seed,
                          "N": max(2, args.length), "M": max(3, args.length) + 1})
    task = get_task(cfg.task)
    model = build_model(make_model_config(cfg, task),
                        rng=np.random.default_rng(cfg.seed))
    if args.checkpoint:
        model.params.load_arrays(load_checkpoint(args.checkpoint))

    layout = token_layout(task, cfg.comp_tokens, cfg.autoregressive)
    rng = np.random.default_rng(cfg.seed)
    tokens, _, _, lengths = build_batch(task, rng, cfg.N, layout, 1,
                                        cfg.comp_tokens, fixed_length=args.length)
    trace = record_trace(model, tokens[0], input_length=lengths[:1])
    export_trace(trace, args.out)
    print(f"wrote {len(trace)} steps to {args.out}/")

    if trace.steps and "hidden" in trace.steps[0]:
        states = np.asarray([e["hidden"] for e in trace])
        k = min(2, min(states.shape))
        proj, _, explained = pca(states, k)
        clusters = single_linkage_clusters(proj, args.radius)
        print(f"hidden states: {len(states)} points, "
              f"PC variances {np.round(explained, 4).tolist()}, "
              f"{clusters} cluster(s) at radius {args.radius}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
