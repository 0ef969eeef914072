"""Sequence learners: RNN, LSTM, Stack-RNN/LSTM, Tape-RNN, and a Transformer
encoder with five positional-encoding options plus a causal mode.

All models consume one-hot token arrays of shape (batch, T, vocab_in) and
emit logits of shape (batch, T, vocab_out) via a final linear readout; the
harness selects the output positions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import memory as mem
from .autodiff import ParamStore, Tensor, glorot_uniform

ARCHITECTURES = ("rnn", "lstm", "stack_rnn", "stack_lstm", "tape_rnn", "transformer")
POS_ENCODINGS = ("none", "sincos", "rope", "alibi", "relative")


@dataclass
class ModelConfig:
    arch: str
    vocab_in: int
    vocab_out: int
    hidden: int = 256
    d_cell: int = 8
    stack_depth: int = 128
    tape_cells: int = 256
    n_tapes: int = 1
    blocks: int = 5
    d_model: int = 64
    heads: int = 8
    ff_mult: int = 4
    dropout: float = 0.1
    pos_enc: str = "none"
    causal: bool = False

    def __post_init__(self):
        if self.arch not in ARCHITECTURES:
            raise ValueError(f"unknown architecture {self.arch!r}")
        if self.pos_enc not in POS_ENCODINGS:
            raise ValueError(f"unknown positional encoding {self.pos_enc!r}")
        if self.arch == "transformer" and self.d_model % self.heads != 0:
            raise ValueError("d_model must be divisible by heads")


def one_hot(tokens, vocab, dtype=np.float32):
    tokens = np.asarray(tokens, dtype=np.int64)
    out = np.zeros(tokens.shape + (vocab,), dtype=dtype)
    np.put_along_axis(out, tokens[..., None], 1.0, axis=-1)
    return out


# ---------------------------------------------------------------------------
# Positional signals
# ---------------------------------------------------------------------------

def sincos_encoding(positions, d, dtype=np.float64):
    """Classic sinusoid table: PE[p, 2i] = sin(p/10000^(2i/d)), PE[p, 2i+1] = cos."""
    positions = np.asarray(positions, dtype=np.float64)
    pe = np.zeros((len(positions), d))
    half = (d + 1) // 2
    div = np.power(10000.0, -2.0 * np.arange(half) / d)
    args = positions[:, None] * div[None, :]
    pe[:, 0::2] = np.sin(args)[:, : pe[:, 0::2].shape[1]]
    pe[:, 1::2] = np.cos(args)[:, : pe[:, 1::2].shape[1]]
    return pe.astype(dtype)


def rope_tables(positions, d_head, dtype=np.float64):
    """cos/sin tables (T, d_head) for the half-split rotary scheme."""
    positions = np.asarray(positions, dtype=np.float64)
    half = d_head // 2
    theta = np.power(10000.0, -2.0 * np.arange(half) / d_head)
    angles = positions[:, None] * theta[None, :]
    cos = np.concatenate([np.cos(angles), np.cos(angles)], axis=-1)
    sin = np.concatenate([np.sin(angles), np.sin(angles)], axis=-1)
    return cos.astype(dtype), sin.astype(dtype)


def alibi_bias(heads, T, dtype=np.float64):
    """Attention bias -s_h * |i - j| with slopes s_h = 2^(-8h/H), h = 1..H."""
    slopes = 2.0 ** (-8.0 * np.arange(1, heads + 1) / heads)
    dist = np.abs(np.arange(T)[:, None] - np.arange(T)[None, :]).astype(np.float64)
    return (-slopes[:, None, None] * dist[None, :, :]).astype(dtype)


def positional_signal(kind, positions, d_model, heads=8, d_head=None):
    """Dispatch to the signal a given encoding contributes.

    Returns an additive table for none/sincos, rotation tables for rope, an
    attention bias for alibi, and the relative sinusoid table for relative.
    """
    positions = np.asarray(positions)
    if kind == "none":
        return np.zeros((len(positions), d_model))
    if kind == "sincos":
        return sincos_encoding(positions, d_model)
    if kind == "rope":
        return rope_tables(positions, d_head if d_head else d_model // heads)
    if kind == "alibi":
        return alibi_bias(heads, len(positions))
    if kind == "relative":
        return sincos_encoding(positions, d_model)
    raise ValueError(f"unknown positional encoding {kind!r}")


def rope_rotate(x, cos, sin):
    """Rotate head vectors (..., T, d_head) by position-dependent angles."""
    d = x.shape[-1]
    half = d // 2
    lo = ad.getitem(x, (Ellipsis, slice(0, half)))
    hi = ad.getitem(x, (Ellipsis, slice(half, None)))
    rot = ad.concat([-hi, lo], axis=-1)
    return x * Tensor(cos.astype(x.dtype)) + rot * Tensor(sin.astype(x.dtype))


# ---------------------------------------------------------------------------
# Attention
# ---------------------------------------------------------------------------

def split_heads(x, heads):
    b, t, d = x.shape
    return ad.swapaxes(ad.reshape(x, (b, t, heads, d // heads)), 1, 2)


def merge_heads(x):
    b, h, t, dh = x.shape
    return ad.reshape(ad.swapaxes(x, 1, 2), (b, t, h * dh))


def causal_mask(T, dtype=np.float64):
    m = np.zeros((T, T), dtype=dtype)
    m[np.triu_indices(T, k=1)] = -1e9
    return m


def attention(q, k, v, heads=1, bias=None, causal=False,
              dropout_p=0.0, rng=None, train=False, rope=None):
    """softmax(QK^T/sqrt(d_head) + bias + causal mask) V per head.

    q, k, v: (B, T, D) with D divisible by heads. bias: broadcastable to
    (B, H, T, T), a Tensor or a constant array. Returns merged heads (B, T, D).
    """
    if q.shape[-1] % heads != 0:
        raise ValueError("model width not divisible by head count")
    qh, kh, vh = split_heads(q, heads), split_heads(k, heads), split_heads(v, heads)
    if rope is not None:
        cos, sin = rope
        qh = rope_rotate(qh, cos, sin)
        kh = rope_rotate(kh, cos, sin)
    scale = 1.0 / math.sqrt(q.shape[-1] // heads)
    scores = ad.scale(qh @ ad.swapaxes(kh, -1, -2), scale)
    if bias is not None:
        scores = scores + (bias if isinstance(bias, Tensor) else Tensor(bias.astype(scores.dtype)))
    if causal:
        scores = scores + Tensor(causal_mask(q.shape[-2], dtype=scores.dtype))
    weights = ad.softmax(scores)
    weights = ad.dropout(weights, dropout_p, rng=rng, train=train)
    return merge_heads(weights @ vh)


# ---------------------------------------------------------------------------
# Models
# ---------------------------------------------------------------------------

class SequenceModel:
    def __init__(self, config, rng, dtype=np.float32):
        self.config = config
        self.params = ParamStore(dtype=dtype)
        self._build(rng)

    def _build(self, rng):
        raise NotImplementedError

    def forward(self, x, input_length=None, mem_size=None, rng=None, train=False, trace=None):
        """x: one-hot (B, T, V) array; returns logits Tensor (B, T, vocab_out)."""
        raise NotImplementedError

    def _dense(self, name, rng, shape, bias_init=0.0):
        w = self.params.add(name + "_w", glorot_uniform(rng, shape, dtype=self.params.dtype))
        b = self.params.add(name + "_b", np.full(shape[-1], bias_init, dtype=self.params.dtype))
        return w, b


class _RecurrentModel(SequenceModel):
    """Shared unroll loop; subclasses define the controller and memory."""

    memory_kind = None  # None | "stack" | "tape"

    def _controller_dims(self):
        cfg = self.config
        read_dim = 0
        if self.memory_kind == "stack":
            read_dim = cfg.d_cell
        elif self.memory_kind == "tape":
            read_dim = cfg.d_cell * cfg.n_tapes
        return cfg.vocab_in + read_dim

    def _build(self, rng):
        cfg = self.config
        in_dim = self._controller_dims()
        self._build_controller(rng, in_dim, cfg.hidden)
        if self.memory_kind == "stack":
            self._dense("act", rng, (cfg.hidden, 3))
            self._dense("val", rng, (cfg.hidden, cfg.d_cell))
        elif self.memory_kind == "tape":
            for i in range(cfg.n_tapes):
                self._dense(f"act{i}", rng, (cfg.hidden, 5))
                self._dense(f"val{i}", rng, (cfg.hidden, cfg.d_cell))
        self._dense("out", rng, (cfg.hidden, cfg.vocab_out))

    def initial_memory(self, batch, mem_size=None, dtype=None):
        cfg = self.config
        dtype = dtype or self.params.dtype
        if self.memory_kind == "stack":
            depth = mem_size or cfg.stack_depth
            return mem.new_stack(depth, cfg.d_cell, batch=(batch,), dtype=dtype)
        if self.memory_kind == "tape":
            cells = mem_size or cfg.tape_cells
            return [mem.new_tape(cells, cfg.d_cell, batch=(batch,), dtype=dtype)
                    for _ in range(cfg.n_tapes)]
        return None

    def forward(self, x, input_length=None, mem_size=None, rng=None, train=False, trace=None):
        x = np.asarray(x, dtype=self.params.dtype)
        batch, T, _ = x.shape
        state = self._initial_controller_state(batch)
        memory = self.initial_memory(batch, mem_size=mem_size)
        if self.memory_kind == "tape" and input_length is None:
            raise ValueError("tape model needs the input length for jump actions")
        p = self.params
        logits_steps = []
        for t in range(T):
            x_t = Tensor(x[:, t, :])
            if self.memory_kind == "stack":
                read = mem.stack_read(memory)
                inp = ad.concat([x_t, read], axis=-1)
            elif self.memory_kind == "tape":
                reads = [mem.tape_read(tp) for tp in memory]
                inp = ad.concat([x_t] + reads, axis=-1)
            else:
                inp = x_t
            state, h = self._controller_step(state, inp)
            step_trace = None
            if trace is not None:
                step_trace = {"step": t, "token": int(np.argmax(x[0, t])),
                              "hidden": h.data[0].copy()}
            if self.memory_kind == "stack":
                actions = ad.softmax(h @ p["act_w"] + p["act_b"])
                value = ad.tanh(h @ p["val_w"] + p["val_b"])
                memory = mem.stack_update(memory, actions, value)
                if step_trace is not None:
                    step_trace["actions"] = actions.data[0].copy()
                    step_trace["memory"] = memory.cells.data[0].copy()
            elif self.memory_kind == "tape":
                new_tapes = []
                act_rows, cell_rows, head_rows = [], [], []
                for i, tp in enumerate(memory):
                    actions = ad.softmax(h @ p[f"act{i}_w"] + p[f"act{i}_b"])
                    value = ad.tanh(h @ p[f"val{i}_w"] + p[f"val{i}_b"])
                    tp = mem.tape_update(tp, actions, value, input_length)
                    new_tapes.append(tp)
                    if step_trace is not None:
                        act_rows.append(actions.data[0].copy())
                        cell_rows.append(tp.cells.data[0].copy())
                        head_rows.append(tp.head.data[0].copy())
                memory = new_tapes
                if step_trace is not None:
                    step_trace["actions"] = np.concatenate(act_rows)
                    step_trace["memory"] = np.concatenate(cell_rows)
                    step_trace["head"] = np.concatenate(head_rows)
            row = h @ p["out_w"] + p["out_b"]
            if step_trace is not None:
                step_trace["logits"] = row.data[0].copy()
                trace.append(step_trace)
            logits_steps.append(ad.getitem(row, (slice(None), None, slice(None))))
        return ad.concat(logits_steps, axis=1)


class RNN(_RecurrentModel):
    def _build_controller(self, rng, in_dim, hidden):
        self.params.add("wx", glorot_uniform(rng, (in_dim, hidden), dtype=self.params.dtype))
        self.params.add("wh", glorot_uniform(rng, (hidden, hidden), dtype=self.params.dtype))
        self.params.add("b", np.zeros(hidden, dtype=self.params.dtype))

    def _initial_controller_state(self, batch):
        return Tensor(np.zeros((batch, self.config.hidden), dtype=self.params.dtype))

    def _controller_step(self, state, inp):
        p = self.params
        h = ad.tanh(inp @ p["wx"] + state @ p["wh"] + p["b"])
        return h, h


class LSTM(_RecurrentModel):
    def _build_controller(self, rng, in_dim, hidden):
        p = self.params
        p.add("wx", glorot_uniform(rng, (in_dim, 4 * hidden), dtype=p.dtype))
        p.add("wh", glorot_uniform(rng, (hidden, 4 * hidden), dtype=p.dtype))
        bias = np.zeros(4 * hidden, dtype=p.dtype)
        bias[hidden: 2 * hidden] = 1.0  # forget-gate bias
        p.add("b", bias)

    def _initial_controller_state(self, batch):
        z = np.zeros((batch, self.config.hidden), dtype=self.params.dtype)
        return (Tensor(z.copy()), Tensor(z.copy()))

    def _controller_step(self, state, inp):
        p = self.params
        h, c = state
        hid = self.config.hidden
        gates = inp @ p["wx"] + h @ p["wh"] + p["b"]
        i = ad.sigmoid(ad.getitem(gates, (Ellipsis, slice(0, hid))))
        f = ad.sigmoid(ad.getitem(gates, (Ellipsis, slice(hid, 2 * hid))))
        g = ad.tanh(ad.getitem(gates, (Ellipsis, slice(2 * hid, 3 * hid))))
        o = ad.sigmoid(ad.getitem(gates, (Ellipsis, slice(3 * hid, 4 * hid))))
        c_new = f * c + i * g
        h_new = o * ad.tanh(c_new)
        return (h_new, c_new), h_new


class StackRNN(RNN):
    memory_kind = "stack"


class StackLSTM(LSTM):
    memory_kind = "stack"


class TapeRNN(RNN):
    memory_kind = "tape"


class Transformer(SequenceModel):
    def _build(self, rng):
        cfg = self.config
        p = self.params
        d, ff = cfg.d_model, cfg.ff_mult * cfg.d_model
        p.add("emb", glorot_uniform(rng, (cfg.vocab_in, d), dtype=p.dtype))
        for l in range(cfg.blocks):
            p.add(f"ln1g{l}", np.ones(d, dtype=p.dtype))
            p.add(f"ln1b{l}", np.zeros(d, dtype=p.dtype))
            for name in ("wq", "wk", "wv", "wo"):
                self._dense(f"{name}{l}", rng, (d, d))
            p.add(f"ln2g{l}", np.ones(d, dtype=p.dtype))
            p.add(f"ln2b{l}", np.zeros(d, dtype=p.dtype))
            self._dense(f"ff1_{l}", rng, (d, ff))
            self._dense(f"ff2_{l}", rng, (ff, d))
            if cfg.pos_enc == "relative":
                p.add(f"rproj{l}", glorot_uniform(rng, (d, d), dtype=p.dtype))
        if cfg.pos_enc == "relative":
            dh = d // cfg.heads
            p.add("rel_u", np.zeros((cfg.heads, dh), dtype=p.dtype))
            p.add("rel_v", np.zeros((cfg.heads, dh), dtype=p.dtype))
        p.add("lnfg", np.ones(d, dtype=p.dtype))
        p.add("lnfb", np.zeros(d, dtype=p.dtype))
        self._dense("out", rng, (d, cfg.vocab_out))

    def _relative_bias(self, layer, qh, kh, T):
        """Transformer-XL style content/position score decomposition."""
        cfg = self.config
        p = self.params
        dh = cfg.d_model // cfg.heads
        offsets = np.arange(T - 1, -T, -1)  # relative distance i - j per table row
        r_table = Tensor(sincos_encoding(offsets, cfg.d_model, dtype=self.params.dtype))
        r = r_table @ p[f"rproj{layer}"]                       # (2T-1, d)
        r = ad.swapaxes(ad.reshape(r, (2 * T - 1, cfg.heads, dh)), 0, 1)  # (H, 2T-1, dh)
        idx = np.arange(T)[None, :] - np.arange(T)[:, None] + T - 1       # idx[i, j] = j-i+T-1
        qr = ad.gather_last(qh @ ad.swapaxes(r, -1, -2), idx)  # (B, H, T, T)
        u = ad.reshape(p["rel_u"], (cfg.heads, 1, dh))
        uk = u @ ad.swapaxes(kh, -1, -2)                       # (B, H, 1, T)
        v = ad.reshape(p["rel_v"], (cfg.heads, 1, dh))
        vr = ad.reshape(v @ ad.swapaxes(r, -1, -2), (cfg.heads, 2 * T - 1))
        vrg = ad.take(vr, idx, axis=-1)                        # (H, T, T)
        return ad.scale(qr + uk + vrg, 1.0 / math.sqrt(dh))

    def forward(self, x, input_length=None, mem_size=None, rng=None, train=False, trace=None):
        cfg = self.config
        p = self.params
        x = np.asarray(x, dtype=self.params.dtype)
        _, T, _ = x.shape
        h = Tensor(x) @ p["emb"]
        if cfg.pos_enc == "sincos":
            h = h + Tensor(sincos_encoding(np.arange(T), cfg.d_model, dtype=self.params.dtype))
        rope = None
        if cfg.pos_enc == "rope":
            cos, sin = rope_tables(np.arange(T), cfg.d_model // cfg.heads,
                                   dtype=self.params.dtype)
            rope = (cos, sin)
        static_bias = alibi_bias(cfg.heads, T, dtype=self.params.dtype) if cfg.pos_enc == "alibi" else None
        for l in range(cfg.blocks):
            a_in = ad.layer_norm(h, p[f"ln1g{l}"], p[f"ln1b{l}"])
            q = a_in @ p[f"wq{l}_w"] + p[f"wq{l}_b"]
            k = a_in @ p[f"wk{l}_w"] + p[f"wk{l}_b"]
            v = a_in @ p[f"wv{l}_w"] + p[f"wv{l}_b"]
            bias = static_bias
            if cfg.pos_enc == "relative":
                qh, kh = split_heads(q, cfg.heads), split_heads(k, cfg.heads)
                bias = self._relative_bias(l, qh, kh, T)
            att = attention(q, k, v, heads=cfg.heads, bias=bias, causal=cfg.causal,
                            dropout_p=cfg.dropout, rng=rng, train=train, rope=rope)
            att = att @ p[f"wo{l}_w"] + p[f"wo{l}_b"]
            h = h + ad.dropout(att, cfg.dropout, rng=rng, train=train)
            m_in = ad.layer_norm(h, p[f"ln2g{l}"], p[f"ln2b{l}"])
            ff = relu(m_in @ p[f"ff1_{l}_w"] + p[f"ff1_{l}_b"]) @ p[f"ff2_{l}_w"] + p[f"ff2_{l}_b"]
            h = h + ad.dropout(ff, cfg.dropout, rng=rng, train=train)
            if trace is not None:
                trace.append({"layer": l, "activations": h.data[0].copy()})
        h = ad.layer_norm(h, p["lnfg"], p["lnfb"])
        return h @ p["out_w"] + p["out_b"]


def relu(a):
    a = ad.as_tensor(a)
    y = np.maximum(a.data, 0.0)
    return ad._record(y, (a,), lambda g: (g * (a.data > 0),))


_MODEL_CLASSES = {
    "rnn": RNN,
    "lstm": LSTM,
    "stack_rnn": StackRNN,
    "stack_lstm": StackLSTM,
    "tape_rnn": TapeRNN,
    "transformer": Transformer,
}


def build_model(config, seed=0, dtype=np.float32, rng=None):
    if rng is None:
        rng = np.random.default_rng(seed)
    return _MODEL_CLASSES[config.arch](config, rng, dtype=dtype)


def run_model(model, padded_tokens, output_mask, input_length=None, mem_size=None):
    """Logits at the output positions of one padded sequence.

    padded_tokens: 1-D int tokens (input plus empty/computation tokens);
    output_mask: 1-D bools marking the m output slots.
    """
    tokens = np.asarray(padded_tokens)
    x = one_hot(tokens[None, :], model.config.vocab_in, dtype=model.params.dtype)
    logits = model.forward(x, input_length=input_length, mem_size=mem_size)
    rows = np.flatnonzero(np.asarray(output_mask))
    return ad.getitem(logits, (0, rows, slice(None)))


def toy_config(arch, vocab_in=3, vocab_out=2, **kw):
    """Tiny dimensions for gradient checks."""
    defaults = dict(hidden=8, d_cell=4, stack_depth=6, tape_cells=6,
                    blocks=2, d_model=8, heads=2, ff_mult=2, dropout=0.0)
    defaults.update(kw)
    return ModelConfig(arch, vocab_in, vocab_out, **defaults)
