"""Model assembly: ablations, config resolution, the pair forward pass, gradcheck."""

import numpy as np
import pytest

from paradet import autodiff as ad
from paradet.embeddings import embed_sentence, load_pretrained
from paradet.encoder import encode_sentence
from paradet.errors import ShapeError
from paradet.features import build_features
from paradet.gradcheck import REL_TOLERANCE, check_model, check_tensor, relative_errors
from paradet.model import (
    ABLATIONS,
    PRED_CLAMP,
    PROFILE_DEFAULTS,
    ModelConfig,
    PairModel,
)
from paradet.training import Trainer, holdout_split
from paradet.corpus import load_twitter

from conftest import EMBEDDINGS_PATH, TOY_CORPUS_PATH, tiny_model_config

S1 = ["still", "wind", "again", "cloud", "now"]
S2 = ["frost", "wind", "is", "cloud", "was"]


# --- configuration ---------------------------------------------------------------


def test_profile_defaults_fill_in(table):
    cfg = tiny_model_config(lr=None, dropout=None)
    cfg.resolve(table.dimension)
    assert cfg.lr == 0.70
    assert cfg.dropout == 0.2
    msrp = tiny_model_config(lr=None, dropout=None, dataset_profile="msrp")
    msrp.resolve(table.dimension)
    assert msrp.lr == 0.9
    assert msrp.dropout == 0.5
    assert PROFILE_DEFAULTS["twitter"] == {"lr": 0.70, "dropout": 0.2}
    assert PROFILE_DEFAULTS["msrp"] == {"lr": 0.9, "dropout": 0.5}


def test_explicit_values_beat_defaults(table):
    cfg = tiny_model_config(lr=0.123, dropout=0.05)
    cfg.resolve(table.dimension)
    assert cfg.lr == 0.123
    assert cfg.dropout == 0.05
    assert cfg.encoder.dropout_rate == 0.05  # copied to the encoder
    assert cfg.encoder.embedding_dim == table.dimension


def test_config_validation(table):
    with pytest.raises(ValueError):
        tiny_model_config(ablation="huge").resolve(8)
    with pytest.raises(ValueError):
        tiny_model_config(dataset_profile="news").resolve(8)
    with pytest.raises(ValueError):
        tiny_model_config(min_len=2).resolve(8)  # widest filter is 3
    with pytest.raises(ValueError):
        tiny_model_config(threshold=1.5).resolve(8)
    with pytest.raises(ValueError):
        tiny_model_config(lr=0.0).resolve(8)
    with pytest.raises(ValueError):
        tiny_model_config(epochs=-1).resolve(8)


def test_head_input_size_per_ablation():
    sizes = {}
    for ablation in ABLATIONS:
        cfg = tiny_model_config(ablation=ablation)
        sizes[ablation] = cfg.head_input_size()
    lstm, wsim = 6, 2 * 3
    assert sizes == {
        "sentmod": lstm,
        "pairwise": wsim,
        "deep": lstm + wsim,
        "augdeep": lstm + wsim + 7,  # twitter profile: 7 statistical features
    }
    msrp = tiny_model_config(ablation="augdeep", dataset_profile="msrp")
    assert msrp.head_input_size() == lstm + wsim + 12


def test_config_dict_round_trip(table):
    cfg = tiny_model_config(ablation="augdeep", hidden_layers=(5, 3))
    cfg.resolve(table.dimension)
    clone = ModelConfig.from_dict(cfg.to_dict())
    assert clone.to_dict() == cfg.to_dict()
    assert clone.encoder.filter_widths == (2, 3)
    assert clone.hidden_layers == (5, 3)


# --- parameters ------------------------------------------------------------------


def test_parameter_sets_per_ablation(table):
    for ablation, want_enc, want_wsim in [
        ("sentmod", True, False),
        ("pairwise", False, True),
        ("deep", True, True),
        ("augdeep", True, True),
    ]:
        model = PairModel.build(tiny_model_config(ablation=ablation), table)
        names = set(model.params.named())
        assert any(n.startswith("enc.") for n in names) == want_enc
        assert any(n.startswith("wsim.") for n in names) == want_wsim
        assert "head.h0.w" in names and "head.out.w" in names
        assert "emb.vectors" not in names


def test_head_dimensions_chain(table):
    model = PairModel.build(tiny_model_config(hidden_layers=(5, 3)), table)
    named = model.params.named()
    in_size = model.config.head_input_size()
    assert named["head.h0.w"].shape == (5, in_size)
    assert named["head.h1.w"].shape == (3, 5)
    assert named["head.out.w"].shape == (1, 3)
    assert named["head.out.b"].shape == (1,)


def test_finetune_registers_embeddings(tmp_path):
    # a private table so the shared session fixture stays frozen
    table = load_pretrained(EMBEDDINGS_PATH)
    model = PairModel.build(tiny_model_config(finetune_embeddings=True), table)
    named = model.params.named()
    assert "emb.vectors" in named
    assert named["emb.vectors"] is table.vectors
    assert table.vectors.requires_grad


def test_finetune_training_moves_used_rows_but_not_pad(toy_corpus=None):
    table = load_pretrained(EMBEDDINGS_PATH)
    corpus = load_twitter(TOY_CORPUS_PATH, "train")
    base, dev = holdout_split(corpus, 0.25, seed=3)
    model = PairModel.build(tiny_model_config(finetune_embeddings=True, epochs=1), table)
    before = table.vectors.values.copy()
    trainer = Trainer(model, base, dev)
    trainer.run_epoch()
    after = table.vectors.values
    pad = table.vocab.pad_index
    assert np.array_equal(after[pad], before[pad])
    assert not np.array_equal(after, before)


# --- forward pass -----------------------------------------------------------------


def test_forward_scalar_in_clamped_range(table):
    for ablation in ABLATIONS:
        model = PairModel.build(tiny_model_config(ablation=ablation), table)
        prob = model.forward_pair(S1, S2)
        assert prob.shape == (1,)
        p = prob.item()
        assert PRED_CLAMP <= p <= 1.0 - PRED_CLAMP
        assert model.predict_proba(S1, S2) == p


def test_forward_eval_deterministic(table):
    model = PairModel.build(tiny_model_config(dropout=0.3), table)
    assert model.predict_proba(S1, S2) == model.predict_proba(S1, S2)


def test_absolute_difference_makes_sentmod_symmetric(table):
    model = PairModel.build(
        tiny_model_config(ablation="sentmod", absolute_difference=True), table
    )
    assert model.predict_proba(S1, S2) == model.predict_proba(S2, S1)
    signed = PairModel.build(tiny_model_config(ablation="sentmod"), table)
    assert signed.predict_proba(S1, S2) != signed.predict_proba(S2, S1)


def test_forward_train_mode_consumes_rng(table):
    model = PairModel.build(tiny_model_config(dropout=0.4), table)
    rng = np.random.default_rng(0)
    a = model.forward_pair(S1, S2, mode="train", rng=rng).item()
    b = model.forward_pair(S1, S2, mode="train", rng=rng).item()
    assert a != b  # successive draws use fresh masks
    eval_p = model.predict_proba(S1, S2)
    assert a != eval_p


def test_builds_are_seed_deterministic(table):
    a = PairModel.build(tiny_model_config(), table).params.named()
    b = PairModel.build(tiny_model_config(), table).params.named()
    for name in a:
        assert np.array_equal(a[name].values, b[name].values)


def test_stat_block_backward_reaches_all_parameter_groups(table):
    # the token-derived statistics are constants of the pair, but the
    # representation cosine keeps the encoder differentiable through the
    # stat block: every parameter group must receive a gradient
    model = PairModel.build(tiny_model_config(ablation="augdeep"), table)
    prob = model.forward_pair(S1, S2, mode="eval")
    loss = ad.bce_loss(prob, 1)
    ad.backward(loss)
    named = model.params.named()
    missing = {n for n, t in named.items() if t.grad is None}
    assert missing == set()
    ad.zero_grad(named.values())


def test_graph_cosine_agrees_with_feature_value(table):
    # the differentiable cosine slot and the plain feature computation are
    # two expressions of the same quantity; they must agree to round-off
    model = PairModel.build(tiny_model_config(ablation="augdeep"), table)
    v1 = encode_sentence(embed_sentence(S1, table), model.config.encoder,
                         model.params.encoder, mode="eval")
    v2 = encode_sentence(embed_sentence(S2, table), model.config.encoder,
                         model.params.encoder, mode="eval")
    stats = build_features(S1, S2, encodings=(v1.values, v2.values),
                           dataset_profile="twitter", idf=model.idf)
    graph_cos = ad.reshape(
        ad.pairwise_dot(
            ad.normalize_columns(ad.reshape(v1, (v1.shape[0], 1))),
            ad.normalize_columns(ad.reshape(v2, (v2.shape[0], 1))),
        ),
        (1,),
    )
    i = stats.names.index("repr_cosine")
    assert abs(graph_cos.item() - stats.values[i]) < 1e-12


# --- gradcheck -------------------------------------------------------------------------


def test_relative_errors_floor():
    errs = relative_errors(np.array([0.0, 1.0]), np.array([5e-5, 1.0 + 1e-5]))
    assert errs[0] == pytest.approx(0.5)  # judged against the 1e-4 floor
    assert errs[1] == pytest.approx(1e-5, rel=1e-3)


def test_check_tensor_passes_and_fails():
    w = ad.Tensor([0.3, -0.7], requires_grad=True, name="w")
    err = check_tensor(lambda: ad.tsum(ad.mul(w, w)), w)
    assert err < REL_TOLERANCE

    # a deliberately wrong backward rule must be caught
    def bad_op(t):
        out = ad.Tensor(t.values * 2.0)
        out._op = "bad"
        out.requires_grad = True
        out._parents = (t,)
        out._backward = lambda g, emit: emit(t, g * 3.0)  # wrong: claims slope 3
        return out

    err = check_tensor(lambda: ad.tsum(bad_op(w)), w)
    assert err > REL_TOLERANCE


def test_check_model_all_parameters_pass(table):
    model = PairModel.build(tiny_model_config(ablation="augdeep"), table)
    errors = check_model(model, S1, S2, label=1)
    assert set(errors) == set(model.params.named())
    worst = max(errors.values())
    assert worst < REL_TOLERANCE, f"worst gradcheck error {worst}"
