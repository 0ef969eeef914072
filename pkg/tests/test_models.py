import math

import numpy as np
import pytest

from chomsky_bench import autodiff as ad
from chomsky_bench import models as mdl
from chomsky_bench.models import (ModelConfig, alibi_bias, attention,
                                  build_model, causal_mask, one_hot,
                                  rope_rotate, rope_tables, run_model,
                                  sincos_encoding, toy_config)


def forward_tokens(model, tokens, **kw):
    x = one_hot(np.asarray(tokens), model.config.vocab_in, dtype=np.float64)
    return model.forward(x, **kw).data


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

def test_config_rejects_unknown_architecture_and_encoding():
    with pytest.raises(ValueError):
        ModelConfig("mlp", 3, 2)
    with pytest.raises(ValueError):
        ModelConfig("rnn", 3, 2, pos_enc="learned")
    with pytest.raises(ValueError):
        ModelConfig("transformer", 3, 2, d_model=10, heads=4)


def test_one_hot():
    out = one_hot(np.array([[0, 2], [1, 1]]), 3)
    assert out.shape == (2, 2, 3)
    assert np.array_equal(out[0, 1], [0, 0, 1])
    assert np.array_equal(out.sum(axis=-1), np.ones((2, 2)))


# ---------------------------------------------------------------------------
# positional signals
# ---------------------------------------------------------------------------

def test_sincos_matches_formula():
    pe = sincos_encoding(np.arange(5), 6)
    for p in range(5):
        for i in range(3):
            angle = p / 10000.0 ** (2 * i / 6)
            assert abs(pe[p, 2 * i] - math.sin(angle)) <= 1e-12
            assert abs(pe[p, 2 * i + 1] - math.cos(angle)) <= 1e-12


def test_rope_rotation_preserves_norm_and_is_identity_at_origin():
    cos, sin = rope_tables(np.arange(4), 6)
    x = ad.Tensor(np.random.default_rng(0).normal(size=(2, 4, 6)))
    y = rope_rotate(x, cos, sin).data
    assert np.abs(np.linalg.norm(y, axis=-1) - np.linalg.norm(x.data, axis=-1)).max() <= 1e-9
    assert np.abs(y[:, 0] - x.data[:, 0]).max() <= 1e-12


def test_rope_scores_depend_only_on_relative_position():
    rng = np.random.default_rng(1)
    q, k = rng.normal(size=6), rng.normal(size=6)

    def score(m, n):
        cos, sin = rope_tables(np.array([m, n]), 6)
        qr = rope_rotate(ad.Tensor(q[None, :]), cos[:1], sin[:1]).data[0]
        kr = rope_rotate(ad.Tensor(k[None, :]), cos[1:], sin[1:]).data[0]
        return float(qr @ kr)

    assert abs(score(3, 5) - score(10, 12)) <= 1e-9
    assert abs(score(7, 2) - score(15, 10)) <= 1e-9


def test_alibi_slopes_and_distances():
    bias = alibi_bias(8, 4)
    assert bias.shape == (8, 4, 4)
    assert np.array_equal(np.diagonal(bias, axis1=1, axis2=2), np.zeros((8, 4)))
    assert abs(bias[0, 0, 1] - (-0.5)) <= 1e-12          # s_1 = 2^-1
    assert abs(bias[7, 0, 2] - (-2 * 2.0 ** -8)) <= 1e-15  # s_8 = 2^-8
    assert np.array_equal(bias, np.swapaxes(bias, 1, 2))


def test_positional_signal_rejects_unknown_kind():
    with pytest.raises(ValueError):
        mdl.positional_signal("fourier", np.arange(3), 8)


def test_causal_mask_blocks_the_future_only():
    m = causal_mask(3)
    assert np.array_equal(m[np.tril_indices(3)], np.zeros(6))
    assert (m[np.triu_indices(3, k=1)] <= -1e8).all()


# ---------------------------------------------------------------------------
# attention
# ---------------------------------------------------------------------------

def test_attention_uniform_when_scores_are_equal():
    v = np.random.default_rng(2).normal(size=(1, 3, 4))
    zeros = ad.Tensor(np.zeros((1, 3, 4)))
    out = attention(zeros, zeros, ad.Tensor(v), heads=2).data
    assert np.abs(out - v.mean(axis=1, keepdims=True)).max() <= 1e-9


def test_causal_attention_first_position_sees_only_itself():
    rng = np.random.default_rng(3)
    q, k, v = (ad.Tensor(rng.normal(size=(1, 4, 4))) for _ in range(3))
    out = attention(q, k, v, heads=1, causal=True).data
    assert np.abs(out[0, 0] - v.data[0, 0]).max() <= 1e-7


def test_attention_rejects_indivisible_width():
    t = ad.Tensor(np.zeros((1, 2, 6)))
    with pytest.raises(ValueError):
        attention(t, t, t, heads=4)


# ---------------------------------------------------------------------------
# model construction and forward shapes
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("arch", mdl.ARCHITECTURES)
def test_forward_shapes_and_determinism(arch):
    cfg = toy_config(arch)
    model = build_model(cfg, seed=5, dtype=np.float64)
    twin = build_model(cfg, seed=5, dtype=np.float64)
    for (name, p), (_, q) in zip(model.params, twin.params):
        assert np.array_equal(p.data, q.data), name
    tokens = np.array([[0, 1, 2, 1], [2, 0, 0, 1]])
    out = forward_tokens(model, tokens, input_length=4)
    assert out.shape == (2, 4, cfg.vocab_out)
    again = forward_tokens(model, tokens, input_length=4)
    assert np.array_equal(out, again)


def test_different_seeds_give_different_parameters():
    cfg = toy_config("rnn")
    a = build_model(cfg, seed=0)
    b = build_model(cfg, seed=1)
    assert not np.array_equal(a.params["wx"].data, b.params["wx"].data)


def test_tape_model_requires_input_length():
    model = build_model(toy_config("tape_rnn"), seed=0)
    x = one_hot(np.array([[0, 1]]), 3)
    with pytest.raises(ValueError):
        model.forward(x)


def test_lstm_forget_bias_is_one():
    model = build_model(toy_config("lstm"), seed=0)
    h = model.config.hidden
    b = model.params["b"].data
    assert np.array_equal(b[h:2 * h], np.ones(h))
    assert np.array_equal(b[:h], np.zeros(h))


def test_run_model_selects_masked_rows():
    model = build_model(toy_config("rnn"), seed=1, dtype=np.float64)
    tokens = np.array([0, 1, 2, 2, 1])
    mask = np.array([False, False, True, False, True])
    picked = run_model(model, tokens, mask).data
    full = forward_tokens(model, tokens[None, :])
    assert np.array_equal(picked, full[0, [2, 4]])


def test_recurrent_state_carries_information_forward():
    model = build_model(toy_config("rnn"), seed=2, dtype=np.float64)
    base = forward_tokens(model, np.array([[0, 1, 1, 1]]))
    poked = forward_tokens(model, np.array([[1, 1, 1, 1]]))
    assert np.abs(base[0, -1] - poked[0, -1]).max() > 1e-8


# ---------------------------------------------------------------------------
# transformer specifics
# ---------------------------------------------------------------------------

def test_transformer_without_positions_is_permutation_equivariant():
    model = build_model(toy_config("transformer", pos_enc="none"), seed=3, dtype=np.float64)
    tokens = np.array([[0, 1, 2, 1, 0, 2]])
    perm = np.array([3, 0, 5, 1, 4, 2])
    base = forward_tokens(model, tokens)
    shuffled = forward_tokens(model, tokens[:, perm])
    assert np.abs(shuffled[0] - base[0, perm]).max() <= 1e-5


@pytest.mark.parametrize("enc", ("sincos", "rope", "alibi", "relative"))
def test_positional_encodings_break_permutation_equivariance(enc):
    model = build_model(toy_config("transformer", pos_enc=enc), seed=3, dtype=np.float64)
    tokens = np.array([[0, 1, 2, 1, 0, 2]])
    perm = np.array([3, 0, 5, 1, 4, 2])
    base = forward_tokens(model, tokens)
    shuffled = forward_tokens(model, tokens[:, perm])
    assert np.abs(shuffled[0] - base[0, perm]).max() > 1e-4


def test_causal_transformer_ignores_the_future():
    model = build_model(toy_config("transformer", pos_enc="sincos", causal=True),
                        seed=4, dtype=np.float64)
    a = forward_tokens(model, np.array([[0, 1, 2, 0]]))
    b = forward_tokens(model, np.array([[0, 1, 1, 2]]))
    assert np.abs(a[0, :2] - b[0, :2]).max() <= 1e-12
    assert np.abs(a[0, 2:] - b[0, 2:]).max() > 1e-8


def test_noncausal_transformer_sees_the_whole_sequence():
    model = build_model(toy_config("transformer", pos_enc="sincos"), seed=4, dtype=np.float64)
    a = forward_tokens(model, np.array([[0, 1, 2, 0]]))
    b = forward_tokens(model, np.array([[0, 1, 1, 2]]))
    assert np.abs(a[0, 0] - b[0, 0]).max() > 1e-8


# ---------------------------------------------------------------------------
# gradients through full models (a quick spot check; the exhaustive sweep
# over every architecture and encoding runs in the acceptance suite)
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("arch", ("stack_rnn", "transformer"))
def test_backprop_matches_finite_differences(arch):
    model = build_model(toy_config(arch, pos_enc="rope" if arch == "transformer" else "none"),
                        seed=6, dtype=np.float64)
    tokens = np.array([[0, 1, 2]])
    targets = one_hot(np.array([[1, 0, 1]]), 2, dtype=np.float64)[0]
    mask = np.ones(3)
    x = one_hot(tokens, 3, dtype=np.float64)

    def loss_fn():
        logits = model.forward(x, input_length=3)
        return ad.cross_entropy(ad.getitem(logits, (0,)), targets, mask)

    assert ad.grad_check_store(model.params, loss_fn, h=1e-6) <= 1e-4


def test_trace_capture_has_one_entry_per_step():
    model = build_model(toy_config("tape_rnn"), seed=7, dtype=np.float64)
    trace = []
    x = one_hot(np.array([[0, 1, 2, 0]]), 3, dtype=np.float64)
    model.forward(x, input_length=4, trace=trace)
    assert len(trace) == 4
    assert set(trace[0]) >= {"step", "token", "hidden", "actions", "memory", "head", "logits"}
