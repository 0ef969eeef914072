"""Training and evaluation pipeline: batch construction with empty and
computation tokens, masked-loss training, per-length evaluation and scoring,
hyperparameter sweeps, and the result/checkpoint file formats.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import os
import struct
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import autodiff as ad
from .models import ModelConfig, build_model, one_hot
from .tasks import get_task

COMP_TOKEN_CHOICES = ("0", "l", "2l")

PROFILES = {
    "paper": dict(hidden=256, batch=128, steps=1_000_000, N=40, M=500),
    "desk": dict(hidden=64, batch=64, steps=50_000, N=20, M=100),
}


@dataclass
class TrainConfig:
    task: str
    arch: str
    hidden: int = 256
    N: int = 40
    M: int = 500
    batch: int = 128
    steps: int = 1_000_000
    lr: float = 3e-4
    seed: int = 0
    pos_enc: str = "none"
    n_tapes: int = 1
    comp_tokens: str = "0"
    autoregressive: bool = False
    eval_k: int = 32
    profile: str = ""

    def __post_init__(self):
        if not (1 <= self.N < self.M):
            raise ValueError("need 1 <= N < M")
        if self.steps < 0:
            raise ValueError("steps must be nonnegative")
        if self.comp_tokens not in COMP_TOKEN_CHOICES:
            raise ValueError(f"comp_tokens must be one of {COMP_TOKEN_CHOICES}")


@dataclass
class RunRecord:
    config_hash: str
    task: str
    arch: str
    seed: int
    lr: float
    N: int
    M: int
    curve: np.ndarray
    score: float
    loss_samples: list
    diverged: bool
    wallclock_s: float


# ---------------------------------------------------------------------------
# Token layout and batch construction
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TokenLayout:
    """Index assignment in the model's input vocabulary."""
    n_in: int
    empty: int
    comp: int | None
    out_offset: int | None
    vocab_in: int


def token_layout(task, comp_tokens="0", autoregressive=False):
    n_in = len(task.input_symbols)
    if autoregressive:
        # input symbols, one separator, then the output alphabet
        return TokenLayout(n_in, n_in, None, n_in + 1, n_in + 1 + len(task.output_symbols))
    if comp_tokens != "0":
        return TokenLayout(n_in, n_in, n_in + 1, None, n_in + 2)
    return TokenLayout(n_in, n_in, None, None, n_in + 1)


def comp_count(comp_tokens, length):
    if comp_tokens == "0":
        return 0
    if comp_tokens == "l":
        return length
    if comp_tokens == "2l":
        return 2 * length
    raise ValueError(f"comp_tokens must be one of {COMP_TOKEN_CHOICES}")


def build_batch(task, rng, N, layout, batch, comp_tokens="0", fixed_length=None):
    """Sample a padded batch: per sequence, length l ~ U(1,N), input, then
    c computation tokens and m empty tokens; the mask covers exactly the m
    output slots. Returns (tokens, targets, mask, lengths) int/float arrays.
    """
    seqs, targets_list, lengths = [], [], []
    for _ in range(batch):
        l = fixed_length if fixed_length is not None else int(rng.integers(1, N + 1))
        x = task.sample_input(rng, l)
        y = task.ground_truth(x)
        c = comp_count(comp_tokens if layout.comp is not None else "0", len(x))
        seqs.append(list(x) + [layout.comp] * c + [layout.empty] * len(y))
        targets_list.append(y)
        lengths.append(len(x))
    T = max(len(s) for s in seqs)
    tokens = np.full((batch, T), layout.empty, dtype=np.int64)
    targets = np.zeros((batch, T), dtype=np.int64)
    mask = np.zeros((batch, T), dtype=np.float64)
    for i, (s, y) in enumerate(zip(seqs, targets_list)):
        tokens[i, : len(s)] = s
        start = len(s) - len(y)
        targets[i, start: len(s)] = y
        mask[i, start: len(s)] = 1.0
    return tokens, targets, mask, np.asarray(lengths, dtype=np.int64)


def build_batch_autoregressive(task, rng, N, layout, batch, fixed_length=None):
    """Teacher-forced streams x || separator || y; the mask marks the positions
    whose next token is an output token (loss offset of one).
    """
    if layout.out_offset is None:
        raise ValueError("layout is not autoregressive")
    seqs, targets_list, lengths = [], [], []
    for _ in range(batch):
        l = fixed_length if fixed_length is not None else int(rng.integers(1, N + 1))
        x = task.sample_input(rng, l)
        y = task.ground_truth(x)
        seqs.append(list(x) + [layout.empty] + [layout.out_offset + t for t in y])
        targets_list.append(y)
        lengths.append(len(x))
    T = max(len(s) for s in seqs)
    tokens = np.full((batch, T), layout.empty, dtype=np.int64)
    targets = np.zeros((batch, T), dtype=np.int64)
    mask = np.zeros((batch, T), dtype=np.float64)
    for i, (s, y) in enumerate(zip(seqs, targets_list)):
        tokens[i, : len(s)] = s
        lx = len(s) - len(y) - 1  # separator position
        targets[i, lx: lx + len(y)] = y
        mask[i, lx: lx + len(y)] = 1.0
    return tokens, targets, mask, np.asarray(lengths, dtype=np.int64)


def decode_autoregressive(model, input_tokens, m, layout):
    """Greedy feedback decoding of m output tokens after the separator."""
    stream = list(input_tokens) + [layout.empty]
    out = []
    for _ in range(m):
        x = one_hot(np.asarray(stream)[None, :], model.config.vocab_in,
                    dtype=model.params.dtype)
        logits = model.forward(x, input_length=np.asarray([len(input_tokens)]))
        t = int(np.argmax(logits.data[0, -1]))
        out.append(t)
        stream.append(layout.out_offset + t)
    return out


# ---------------------------------------------------------------------------
# Training and evaluation
# ---------------------------------------------------------------------------

def make_model_config(cfg, task):
    layout = token_layout(get_task(cfg.task) if isinstance(task, str) else task,
                          cfg.comp_tokens, cfg.autoregressive)
    return ModelConfig(
        arch=cfg.arch,
        vocab_in=layout.vocab_in,
        vocab_out=len(task.output_symbols),
        hidden=cfg.hidden,
        n_tapes=cfg.n_tapes,
        pos_enc=cfg.pos_enc,
        causal=cfg.autoregressive and cfg.arch == "transformer",
    )


def config_hash(cfg):
    blob = json.dumps(dataclasses.asdict(cfg), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


def _rngs(seed):
    init_ss, train_ss, eval_ss = np.random.SeedSequence(seed).spawn(3)
    return (np.random.default_rng(init_ss), np.random.default_rng(train_ss),
            np.random.default_rng(eval_ss))


def model_forward(model, tokens, lengths, rng=None, train=False, mem_size=None):
    x = one_hot(tokens, model.config.vocab_in, dtype=model.params.dtype)
    return model.forward(x, input_length=lengths, mem_size=mem_size,
                         rng=rng, train=train)


def train(cfg, log=None):
    """Run Adam on masked cross-entropy for cfg.steps batches, then score.

    Returns (model, RunRecord). A non-finite loss aborts the run and marks
    it diverged with score 0.
    """
    task = get_task(cfg.task)
    layout = token_layout(task, cfg.comp_tokens, cfg.autoregressive)
    model_cfg = make_model_config(cfg, task)
    init_rng, train_rng, eval_rng = _rngs(cfg.seed)
    model = build_model(model_cfg, rng=init_rng)
    t0 = time.monotonic()
    diverged = False
    loss_samples = []
    log_every = max(1, cfg.steps // 100)
    for step in range(cfg.steps):
        if cfg.autoregressive:
            tokens, targets, mask, lengths = build_batch_autoregressive(
                task, train_rng, cfg.N, layout, cfg.batch)
        else:
            tokens, targets, mask, lengths = build_batch(
                task, train_rng, cfg.N, layout, cfg.batch, cfg.comp_tokens)
        with ad.tape():
            logits = model_forward(model, tokens, lengths, rng=train_rng, train=True)
            y = one_hot(targets, model.config.vocab_out, dtype=logits.dtype) * mask[..., None]
            loss = ad.cross_entropy(logits, y, mask)
            if not np.isfinite(loss.data):
                diverged = True
                break
            ad.backward(loss)
        model.params.adam_step(cfg.lr)
        if step % log_every == 0 or step == cfg.steps - 1:
            loss_samples.append((step, float(loss.data)))
            if log is not None:
                log(step, float(loss.data))
    if diverged:
        curve = np.zeros(cfg.M - cfg.N)
        score = 0.0
    else:
        curve = evaluate(model, task, cfg.N, cfg.M, cfg.eval_k, eval_rng,
                         comp_tokens=cfg.comp_tokens, autoregressive=cfg.autoregressive)
        score = compute_score(curve)
    record = RunRecord(config_hash=config_hash(cfg), task=cfg.task, arch=cfg.arch,
                       seed=cfg.seed, lr=cfg.lr, N=cfg.N, M=cfg.M, curve=curve,
                       score=score, loss_samples=loss_samples, diverged=diverged,
                       wallclock_s=time.monotonic() - t0)
    return model, record


def per_sequence_accuracy(logits, target):
    """Fraction of output positions whose argmax matches the target token."""
    logits = np.asarray(logits.data if isinstance(logits, ad.Tensor) else logits)
    target = np.asarray(target)
    if logits.shape[:-1] != target.shape:
        raise ValueError("logit rows disagree with target length")
    return float(np.mean(np.argmax(logits, axis=-1) == target))


def compute_score(curve):
    curve = np.asarray(curve, dtype=np.float64)
    if curve.size == 0:
        raise ValueError("empty accuracy curve")
    return 100.0 * float(curve.mean())


def _eval_mem_size(model, T):
    kind = getattr(model, "memory_kind", None)
    if kind == "stack":
        return max(model.config.stack_depth, T)
    if kind == "tape":
        return max(model.config.tape_cells, T + 1)
    return None


def evaluate(model, task, N, M, k, rng, comp_tokens="0", autoregressive=False):
    """Accuracy curve A(l) for l = N+1..M, k fresh samples per length."""
    layout = token_layout(task, comp_tokens, autoregressive)
    curve = np.zeros(M - N)
    for j, l in enumerate(range(N + 1, M + 1)):
        if autoregressive:
            accs = []
            for _ in range(k):
                x = task.sample_input(rng, l)
                y = task.ground_truth(x)
                pred = decode_autoregressive(model, x, len(y), layout)
                accs.append(float(np.mean(np.asarray(pred) == np.asarray(y))))
            curve[j] = float(np.mean(accs))
            continue
        tokens, targets, mask, lengths = build_batch(
            task, rng, N, layout, k, comp_tokens, fixed_length=l)
        logits = model_forward(model, tokens, lengths,
                               mem_size=_eval_mem_size(model, tokens.shape[1]))
        pred = np.argmax(logits.data, axis=-1)
        hits = (pred == targets) * mask
        curve[j] = float(np.mean(hits.sum(axis=1) / mask.sum(axis=1)))
    return curve


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------

def _grid_configs(base, seeds, lrs, extra_grids=None):
    configs = []
    axes = dict(extra_grids or {})
    keys = list(axes)

    def expand(cfg, i):
        if i == len(keys):
            configs.append(cfg)
            return
        for value in axes[keys[i]]:
            expand(replace(cfg, **{keys[i]: value}), i + 1)

    for seed in seeds:
        for lr in lrs:
            expand(replace(base, seed=seed, lr=lr), 0)
    return configs


def _sweep_run(cfg):
    _, record = train(cfg)
    return record


def worker_count():
    raw = os.environ.get("CHOMSKY_BENCH_WORKERS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ValueError(f"CHOMSKY_BENCH_WORKERS must be an integer, got {raw!r}")


def sweep(base, seeds, lrs, extra_grids=None):
    """Run the full grid; returns (best record, mean score, std, all records).

    Diverged runs are recorded but excluded from the statistics.
    """
    configs = _grid_configs(base, seeds, lrs, extra_grids)
    if not configs:
        raise ValueError("empty sweep grid")
    workers = worker_count()
    if workers > 1 and len(configs) > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_sweep_run, configs))
    else:
        records = [_sweep_run(c) for c in configs]
    live = [r for r in records if not r.diverged]
    if live:
        scores = np.asarray([r.score for r in live])
        best = live[int(np.argmax(scores))]
        return best, float(scores.mean()), float(scores.std()), records
    return None, math.nan, math.nan, records


# ---------------------------------------------------------------------------
# Config files
# ---------------------------------------------------------------------------

_CONFIG_COERCE = {
    "task": str, "arch": str, "hidden": int, "N": int, "M": int, "batch": int,
    "steps": int, "lr": float, "seed": int, "pos_enc": str, "n_tapes": int,
    "comp_tokens": str, "autoregressive": None, "eval_k": int, "profile": str,
}


def _parse_bool(raw):
    low = raw.strip().lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def parse_config_file(path):
    """Flat key = value text; blank lines and # comments skipped."""
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key = value")
            key, _, raw = line.partition("=")
            key, raw = key.strip(), raw.strip()
            if key not in _CONFIG_COERCE:
                raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
            coerce = _CONFIG_COERCE[key]
            values[key] = _parse_bool(raw) if coerce is None else coerce(raw)
    return values


def resolve_config(file_values=None, overrides=None):
    """defaults < profile < config file < explicit overrides."""
    merged = dict(file_values or {})
    for key, value in (overrides or {}).items():
        if value is not None:
            merged[key] = value
    for key in merged:
        if key not in _CONFIG_COERCE:
            raise ValueError(f"unknown config key {key!r}")
    profile = merged.pop("profile", "")
    values = {}
    if profile:
        if profile not in PROFILES:
            raise ValueError(f"unknown profile {profile!r}; choose from {tuple(PROFILES)}")
        values.update(PROFILES[profile])
    values.update(merged)
    values["profile"] = profile
    if "task" not in values or "arch" not in values:
        raise ValueError("config must set both task and arch")
    return TrainConfig(**values)


# ---------------------------------------------------------------------------
# Results files
# ---------------------------------------------------------------------------

def write_curve_csv(curve, N, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("length,accuracy\n")
        for i, acc in enumerate(np.asarray(curve)):
            fh.write(f"{N + 1 + i},{acc:.6f}\n")


def read_curve_csv(path):
    lengths, accs = [], []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "length,accuracy":
            raise ValueError(f"{path}: bad curve header {header!r}")
        for line in fh:
            l, a = line.strip().split(",")
            lengths.append(int(l))
            accs.append(float(a))
    return np.asarray(lengths), np.asarray(accs)


def append_results(records, jsonl_path, curves_dir):
    os.makedirs(curves_dir, exist_ok=True)
    with open(jsonl_path, "a", encoding="utf-8") as fh:
        for r in records:
            curve_file = os.path.join(
                curves_dir, f"curve_{r.config_hash}_s{r.seed}_lr{r.lr:g}.csv")
            write_curve_csv(r.curve, r.N, curve_file)
            fh.write(json.dumps({
                "config_hash": r.config_hash, "task": r.task, "arch": r.arch,
                "seed": r.seed, "lr": r.lr, "score": r.score,
                "diverged": r.diverged, "wallclock_s": r.wallclock_s,
                "curve_file": curve_file,
            }) + "\n")


def read_results(jsonl_path):
    rows = []
    with open(jsonl_path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    return rows


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

CHECKPOINT_MAGIC = b"CHMB"
CHECKPOINT_VERSION = 1


def save_checkpoint(store, path):
    """Little-endian binary dump of all named parameters as float32."""
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<II", CHECKPOINT_VERSION, len(store)))
        for name, p in store:
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<B", p.data.ndim))
            fh.write(struct.pack(f"<{p.data.ndim}I", *p.data.shape))
            fh.write(np.ascontiguousarray(p.data, dtype="<f4").tobytes())


def load_checkpoint(path):
    """Parse a checkpoint into an ordered {name: float32 array} dict."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: bad checkpoint magic {blob[:4]!r}")
    version, count = struct.unpack_from("<II", blob, 4)
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    offset = 12
    arrays = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", blob, offset)
        offset += 2
        name = blob[offset: offset + name_len].decode("utf-8")
        offset += name_len
        (rank,) = struct.unpack_from("<B", blob, offset)
        offset += 1
        shape = struct.unpack_from(f"<{rank}I", blob, offset)
        offset += 4 * rank
        n_bytes = 4 * int(np.prod(shape, dtype=np.int64)) if rank else 4
        data = np.frombuffer(blob[offset: offset + n_bytes], dtype="<f4").reshape(shape)
        offset += n_bytes
        arrays[name] = data.copy()
    if offset != len(blob):
        raise ValueError(f"{path}: trailing bytes after last parameter")
    return arrays
