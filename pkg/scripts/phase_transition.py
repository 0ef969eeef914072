#!/usr/bin/env python3
"""Training-length phase transition: score as a function of the training
length cap N. Trains the same architecture on the same task for several N
values and prints the resulting generalization scores, showing how short
training sequences cripple length generalization.
"""

import argparse
import sys

from chomsky_bench.harness import TrainConfig, train


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--task", default="reverse_string")
    ap.add_argument("--arch", default="stack_rnn")
    ap.add_argument("--ns", default="2,5,10,20", help="comma-separated N values")
    ap.add_argument("--M", type=int, default=100)
    ap.add_argument("--hidden", type=int, default=64)
    ap.add_argument("--batch", type=int, default=64)
    ap.add_argument("--steps", type=int, default=30_000)
    ap.add_argument("--lr", type=float, default=3e-4)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--eval-k", type=int, default=32)
    args = ap.parse_args()

    for n in (int(v) for v in args.ns.split(",")):
        cfg = TrainConfig(task=args.task, arch=args.arch, hidden=args.hidden,
                          N=n, M=args.M, batch=args.batch, steps=args.steps,
                          lr=args.lr, seed=args.seed, eval_k=args.eval_k)
        _, record = train(cfg)
        status = "diverged" if record.diverged else f"score {record.score:6.2f}"
        print(f"N = {n:>3}: {status}  ({record.wallclock_s:.0f}s)", flush=True)
    return 0


if __name__ == "__main__":
    sys.exit(main())
