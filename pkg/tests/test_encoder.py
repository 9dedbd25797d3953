"""Sentence encoder: shapes, determinism, dropout wiring, gradients."""

import numpy as np
import pytest

from paradet import autodiff as ad
from paradet.encoder import EncoderConfig, EncoderParams, encode_sentence, glorot, pair_difference
from paradet.errors import ShapeError

from conftest import assert_grads_match


def tiny_config(**overrides):
    base = dict(filter_widths=(2, 3), filters_per_width=3, lstm_hidden=4,
                dropout_rate=0.0, embedding_dim=5)
    base.update(overrides)
    return EncoderConfig(**base)


def build(config, seed=0):
    return EncoderParams.init(config, np.random.default_rng(seed))


def test_output_shape_and_requires_grad():
    cfg = tiny_config()
    params = build(cfg)
    emb = ad.Tensor(np.random.default_rng(1).normal(size=(5, 9)))
    out = encode_sentence(emb, cfg, params)
    assert out.shape == (4,)
    assert out.requires_grad  # parameters are trainable leaves


def test_pooled_length_bookkeeping():
    # m=9: width 2 -> 8 positions -> 4 pooled; width 3 -> 7 -> 4 (odd tail)
    cfg = tiny_config()
    params = build(cfg)
    emb = ad.Tensor(np.zeros((5, 9)))
    w, b = params.conv[2]
    pooled_2 = ad.halving_max_pool(ad.relu(ad.conv1d(emb, w, b)))
    assert pooled_2.shape == (3, 4)
    w, b = params.conv[3]
    pooled_3 = ad.halving_max_pool(ad.relu(ad.conv1d(emb, w, b)))
    assert pooled_3.shape == (3, 4)


def test_min_length_equals_widest_filter():
    cfg = tiny_config()
    params = build(cfg)
    emb = ad.Tensor(np.ones((5, 2)))
    with pytest.raises(ShapeError):
        encode_sentence(emb, cfg, params)
    out = encode_sentence(ad.Tensor(np.ones((5, 3))), cfg, params)
    assert out.shape == (4,)


def test_embedding_dim_mismatch():
    cfg = tiny_config()
    params = build(cfg)
    with pytest.raises(ShapeError):
        encode_sentence(ad.Tensor(np.ones((4, 6))), cfg, params)


def test_eval_is_deterministic():
    cfg = tiny_config()
    params = build(cfg)
    emb = ad.Tensor(np.random.default_rng(2).normal(size=(5, 7)))
    a = encode_sentence(emb, cfg, params).values
    b = encode_sentence(emb, cfg, params).values
    assert np.array_equal(a, b)


def test_same_seed_same_params():
    cfg = tiny_config()
    a = build(cfg, seed=7).named()
    b = build(cfg, seed=7).named()
    c = build(cfg, seed=8).named()
    assert a.keys() == b.keys() == c.keys()
    for name in a:
        assert np.array_equal(a[name].values, b[name].values)
    assert any(not np.array_equal(a[n].values, c[n].values) for n in a)


def test_param_names_and_shapes():
    cfg = tiny_config()
    named = build(cfg).named()
    assert set(named) == {
        "enc.conv.w2", "enc.conv.b2", "enc.conv.w3", "enc.conv.b3",
        "enc.lstm.Wi", "enc.lstm.Ui", "enc.lstm.bi",
        "enc.lstm.Wf", "enc.lstm.Uf", "enc.lstm.bf",
        "enc.lstm.Wo", "enc.lstm.Uo", "enc.lstm.bo",
        "enc.lstm.Wc", "enc.lstm.Uc", "enc.lstm.bc",
    }
    assert named["enc.conv.w2"].shape == (3, 5, 2)
    assert named["enc.conv.b2"].shape == (3,)
    assert named["enc.lstm.Wi"].shape == (4, 3)
    assert named["enc.lstm.Ui"].shape == (4, 4)
    assert named["enc.lstm.bi"].shape == (4,)
    for name, t in named.items():
        assert t.name == name
        assert t.requires_grad


def test_glorot_bound():
    rng = np.random.default_rng(0)
    vals = glorot(rng, (1000,), fan_in=3, fan_out=5)
    bound = np.sqrt(6.0 / 8.0)
    assert np.all(np.abs(vals) <= bound)
    assert vals.std() > 0.3 * bound  # actually spread out, not collapsed


def test_dropout_only_in_train_mode():
    cfg = tiny_config(dropout_rate=0.5)
    params = build(cfg)
    emb = ad.Tensor(np.random.default_rng(3).normal(size=(5, 8)))
    eval_a = encode_sentence(emb, cfg, params, mode="eval").values
    eval_b = encode_sentence(emb, cfg, params, mode="eval").values
    assert np.array_equal(eval_a, eval_b)
    rng = np.random.default_rng(11)
    train_out = encode_sentence(emb, cfg, params, mode="train", rng=rng).values
    assert not np.array_equal(train_out, eval_a)
    with pytest.raises(ValueError):
        encode_sentence(emb, cfg, params, mode="train", rng=None)


def test_train_without_dropout_matches_eval():
    cfg = tiny_config(dropout_rate=0.0)
    params = build(cfg)
    emb = ad.Tensor(np.random.default_rng(4).normal(size=(5, 7)))
    a = encode_sentence(emb, cfg, params, mode="train", rng=np.random.default_rng(0)).values
    b = encode_sentence(emb, cfg, params, mode="eval").values
    assert np.array_equal(a, b)


def test_single_width_config():
    cfg = tiny_config(filter_widths=(2,))
    params = build(cfg)
    out = encode_sentence(ad.Tensor(np.ones((5, 6))), cfg, params)
    assert out.shape == (4,)


def test_fd_through_full_encoder():
    cfg = tiny_config()
    params = build(cfg, seed=5)
    emb = ad.Tensor(np.random.default_rng(6).normal(size=(5, 6)), requires_grad=True)
    tensors = [emb, *params.named().values()]
    assert_grads_match(lambda: ad.tsum(encode_sentence(emb, cfg, params)), tensors, tol=2e-4)


def test_pair_difference_antisymmetric():
    rng = np.random.default_rng(8)
    v1 = ad.Tensor(rng.normal(size=6))
    v2 = ad.Tensor(rng.normal(size=6))
    d12 = pair_difference(v1, v2).values
    d21 = pair_difference(v2, v1).values
    np.testing.assert_array_equal(d12, -d21)
    assert not np.array_equal(d12, np.abs(d12))  # signed, not absolute
    with pytest.raises(ShapeError):
        pair_difference(v1, ad.Tensor(np.zeros(5)))


def test_config_validation():
    with pytest.raises(ValueError):
        tiny_config(filter_widths=()).validate()
    with pytest.raises(ValueError):
        tiny_config(filter_widths=(2, 2)).validate()
    with pytest.raises(ValueError):
        tiny_config(filters_per_width=0).validate()
    with pytest.raises(ValueError):
        tiny_config(dropout_rate=1.0).validate()
    with pytest.raises(ValueError):
        tiny_config(embedding_dim=0).validate()
