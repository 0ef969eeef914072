"""Command-line front end: train / evaluate / sweep / trace / list-tasks /
selftest / report. Flags override config-file values; all randomness flows
from --seed.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import autodiff as ad
from . import harness as H
from . import memory as mem
from .introspection import export_trace, record_trace
from .models import build_model, one_hot, toy_config
from .oracles import ORACLES
from .tasks import TASKS, get_task


def _bool_flag(raw):
    low = raw.lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {raw!r}")


def _add_config_flags(p):
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--task")
    p.add_argument("--arch")
    p.add_argument("--hidden", type=int)
    p.add_argument("--N", type=int)
    p.add_argument("--M", type=int)
    p.add_argument("--batch", type=int)
    p.add_argument("--steps", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--pos-enc", dest="pos_enc")
    p.add_argument("--n-tapes", dest="n_tapes", type=int)
    p.add_argument("--comp-tokens", dest="comp_tokens")
    p.add_argument("--autoregressive", type=_bool_flag)
    p.add_argument("--eval-k", dest="eval_k", type=int)
    p.add_argument("--profile")


_CONFIG_FLAG_KEYS = ("task", "arch", "hidden", "N", "M", "batch", "steps", "lr",
                     "seed", "pos_enc", "n_tapes", "comp_tokens", "autoregressive",
                     "eval_k", "profile")


def _resolve(args):
    file_values = H.parse_config_file(args.config) if args.config else {}
    overrides = {k: getattr(args, k) for k in _CONFIG_FLAG_KEYS}
    return H.resolve_config(file_values, overrides)


def parse_invocation(argv):
    parser = argparse.ArgumentParser(
        prog="chomsky-bench",
        description="Length-generalization benchmark on formal-language tasks")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one model and record its score")
    _add_config_flags(p)
    p.add_argument("--results", default="results.jsonl")
    p.add_argument("--curves-dir", default="curves")
    p.add_argument("--checkpoint", help="write final parameters here")

    p = sub.add_parser("evaluate", help="score a checkpoint over the test lengths")
    _add_config_flags(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--curve-out", help="write the accuracy curve CSV here")

    p = sub.add_parser("sweep", help="grid over seeds and learning rates")
    _add_config_flags(p)
    p.add_argument("--seeds", default="0,1,2,3,4", help="comma-separated seeds")
    p.add_argument("--lrs", default="1e-4,3e-4,5e-4", help="comma-separated rates")
    p.add_argument("--grid", action="append", default=[],
                   help="extra axis KEY=V1,V2 (repeatable)")
    p.add_argument("--results", default="results.jsonl")
    p.add_argument("--curves-dir", default="curves")

    p = sub.add_parser("trace", help="record and export an execution trace")
    _add_config_flags(p)
    p.add_argument("--length", type=int, default=8)
    p.add_argument("--checkpoint")
    p.add_argument("--out", default="trace_out")

    sub.add_parser("list-tasks", help="list the 15 task ids")
    sub.add_parser("selftest", help="run the built-in verification suite")

    p = sub.add_parser("report", help="summarize a results JSONL file")
    p.add_argument("--results", default="results.jsonl")

    return parser.parse_args(argv)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_train(args):
    cfg = _resolve(args)
    get_task(cfg.task)  # surfaces the valid-ids message early

    def log(step, loss):
        print(f"step {step:>8}  loss {loss:.5f}", flush=True)

    model, record = H.train(cfg, log=log)
    H.append_results([record], args.results, args.curves_dir)
    if args.checkpoint:
        H.save_checkpoint(model.params, args.checkpoint)
    status = "diverged" if record.diverged else f"score {record.score:.2f}"
    print(f"{cfg.task} / {cfg.arch} seed {cfg.seed}: {status} "
          f"({record.wallclock_s:.1f}s)")
    return 1 if record.diverged else 0


def cmd_evaluate(args):
    cfg = _resolve(args)
    task = get_task(cfg.task)
    model = build_model(H.make_model_config(cfg, task),
                        rng=np.random.default_rng(cfg.seed))
    model.params.load_arrays(H.load_checkpoint(args.checkpoint))
    _, _, eval_rng = H._rngs(cfg.seed)
    curve = H.evaluate(model, task, cfg.N, cfg.M, cfg.eval_k, eval_rng,
                       comp_tokens=cfg.comp_tokens, autoregressive=cfg.autoregressive)
    score = H.compute_score(curve)
    if args.curve_out:
        H.write_curve_csv(curve, cfg.N, args.curve_out)
    print(f"{cfg.task} / {cfg.arch}: score {score:.2f}")
    return 0


def cmd_sweep(args):
    cfg = _resolve(args)
    seeds = [int(s) for s in args.seeds.split(",") if s]
    lrs = [float(s) for s in args.lrs.split(",") if s]
    grids = {}
    for item in args.grid:
        key, _, raw = item.partition("=")
        if key not in H._CONFIG_COERCE or not raw:
            raise ValueError(f"bad grid axis {item!r}")
        coerce = H._CONFIG_COERCE[key]
        grids[key] = [coerce(v) if coerce else H._parse_bool(v) for v in raw.split(",")]
    best, mean, std, records = H.sweep(cfg, seeds, lrs, grids)
    H.append_results(records, args.results, args.curves_dir)
    if best is None:
        print("all runs diverged")
        return 1
    print(f"best score {best.score:.2f} (seed {best.seed}, lr {best.lr:g}); "
          f"mean {mean:.2f} +/- {std:.2f} over {len(records)} runs")
    return 0


def cmd_trace(args):
    cfg = _resolve(args)
    task = get_task(cfg.task)
    model = build_model(H.make_model_config(cfg, task),
                        rng=np.random.default_rng(cfg.seed))
    if args.checkpoint:
        model.params.load_arrays(H.load_checkpoint(args.checkpoint))
    layout = H.token_layout(task, cfg.comp_tokens, cfg.autoregressive)
    rng = np.random.default_rng(cfg.seed)
    tokens, _, _, lengths = H.build_batch(task, rng, cfg.N, layout, 1,
                                          cfg.comp_tokens, fixed_length=args.length)
    trace = record_trace(model, tokens[0], input_length=lengths[:1])
    export_trace(trace, args.out)
    print(f"wrote {len(trace)} trace entries to {args.out}/")
    return 0


def cmd_list_tasks(_args):
    print(f"{'task':<22} {'level':<5} {'in':>3} {'out':>3} {'base':>5}  example")
    for spec in TASKS.values():
        print(f"{spec.task_id:<22} {spec.level:<5} {len(spec.input_symbols):>3} "
              f"{len(spec.output_symbols):>3} {spec.baseline:>5.2f}  {spec.example}")
    return 0


def cmd_report(args):
    rows = H.read_results(args.results) if os.path.exists(args.results) else []
    print(render_report(rows))
    return 0


def render_report(rows, check_files=True):
    """Per (task, arch): best score, mean +/- std; '**' marks score >= 90."""
    lines = [f"{'task':<22} {'arch':<12} {'best':>7} {'mean':>7} {'std':>6} "
             f"{'runs':>4}  flags"]
    groups = {}
    for row in rows:
        groups.setdefault((row["task"], row["arch"]), []).append(row)
    for (task, arch), items in sorted(groups.items()):
        scores = [r["score"] for r in items if not r["diverged"]]
        flags = []
        if check_files and any(not os.path.exists(r.get("curve_file", ""))
                               for r in items):
            flags.append("incomplete")
        if any(r["diverged"] for r in items):
            flags.append("diverged-runs")
        if not scores:
            lines.append(f"{task:<22} {arch:<12} {'-':>7} {'-':>7} {'-':>6} "
                         f"{len(items):>4}  {','.join(flags)}")
            continue
        best = max(scores)
        mean = float(np.mean(scores))
        std = float(np.std(scores))
        if best >= 90.0:
            flags.append("**")
        lines.append(f"{task:<22} {arch:<12} {best:>7.1f} {mean:>7.1f} {std:>6.1f} "
                     f"{len(items):>4}  {','.join(flags)}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Selftest
# ---------------------------------------------------------------------------

def _selftest_oracles(report):
    rng = np.random.default_rng(11)
    mismatches = 0
    for task_id, spec in TASKS.items():
        for _ in range(1000):
            x = spec.sample_input(rng, int(rng.integers(1, 101)))
            if spec.ground_truth(x) != ORACLES[task_id](list(x)):
                mismatches += 1
    report("oracle equivalence (1000 samples x 15 tasks)", mismatches == 0)


def _selftest_gradients(report):
    from .models import ARCHITECTURES
    rng = np.random.default_rng(5)
    for arch in ARCHITECTURES:
        cfg = toy_config(arch, vocab_in=4, vocab_out=3)
        model = build_model(cfg, rng=np.random.default_rng(3), dtype=np.float64)
        T = 4
        tokens = rng.integers(0, cfg.vocab_in, size=(2, T))
        x = one_hot(tokens, cfg.vocab_in, dtype=np.float64)
        targets = one_hot(rng.integers(0, cfg.vocab_out, size=(2, T)), cfg.vocab_out,
                          dtype=np.float64)
        mask = np.ones((2, T))

        def loss_fn():
            logits = model.forward(x, input_length=2)
            return ad.cross_entropy(logits, targets, mask)

        err = ad.grad_check_store(model.params, loss_fn, h=1e-6)
        report(f"gradient check {arch} (max rel err {err:.2e})", err <= 1e-4)


def _selftest_memory(report):
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(200):
        steps = int(rng.integers(1, 33))
        n = int(rng.integers(2, 9))
        stack = mem.new_stack(n, 4, dtype=np.float64)
        ref_stack = mem.DiscreteStack(n, 4)
        tape = mem.new_tape(n, 4, dtype=np.float64)
        ref_tape = mem.DiscreteTape(n, 4)
        jump = int(rng.integers(1, n + 1))
        for _ in range(steps):
            v = rng.uniform(-1, 1, size=4)
            sa, ta = int(rng.integers(3)), int(rng.integers(5))
            stack = mem.stack_update(stack, ad.Tensor(np.eye(3)[sa]), ad.Tensor(v))
            ref_stack.update(sa, v)
            tape = mem.tape_update(tape, ad.Tensor(np.eye(5)[ta]), ad.Tensor(v), jump)
            ref_tape.update(ta, v, jump)
        worst = max(worst,
                    float(np.abs(stack.cells.data - ref_stack.state()).max()),
                    float(np.abs(mem.tape_read(tape).data - ref_tape.read()).max()))
    report(f"discrete-limit memory (max err {worst:.2e})", worst <= 1e-12)


def _selftest_checkpoint(report, tmpdir):
    model = build_model(toy_config("rnn"), rng=np.random.default_rng(1))
    p1 = os.path.join(tmpdir, "a.ckpt")
    p2 = os.path.join(tmpdir, "b.ckpt")
    H.save_checkpoint(model.params, p1)
    arrays = H.load_checkpoint(p1)
    twin = build_model(toy_config("rnn"), rng=np.random.default_rng(2))
    twin.params.load_arrays(arrays)
    H.save_checkpoint(twin.params, p2)
    with open(p1, "rb") as a, open(p2, "rb") as b:
        same = a.read() == b.read()
    report("checkpoint round trip byte-identical", same)
    with open(p1, "r+b") as fh:
        fh.write(b"XXXX")
    try:
        H.load_checkpoint(p1)
        report("corrupted magic rejected", False)
    except ValueError:
        report("corrupted magic rejected", True)


def cmd_selftest(_args):
    import tempfile
    failures = []

    def report(name, ok):
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
        if not ok:
            failures.append(name)

    _selftest_oracles(report)
    _selftest_gradients(report)
    _selftest_memory(report)
    with tempfile.TemporaryDirectory() as tmpdir:
        _selftest_checkpoint(report, tmpdir)
    if failures:
        print(f"FAILED: {len(failures)} failure(s)")
        return 1
    print("ok: all checks passed")
    return 0


_COMMANDS = {
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "sweep": cmd_sweep,
    "trace": cmd_trace,
    "list-tasks": cmd_list_tasks,
    "selftest": cmd_selftest,
    "report": cmd_report,
}


def main(argv=None):
    args = parse_invocation(argv if argv is not None else sys.argv[1:])
    try:
        return _COMMANDS[args.command](args)
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
