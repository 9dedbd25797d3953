"""Shared fixtures and independent oracles used across the test suite."""

from __future__ import annotations

import pathlib

import numpy as np
import pytest

from paradet import autodiff as ad
from paradet.embeddings import load_pretrained
from paradet.encoder import EncoderConfig
from paradet.features import LexicalSimilarityProvider
from paradet.model import ModelConfig
from paradet.wordsim import WordSimConfig

FIXTURES = pathlib.Path(__file__).parent / "fixtures"

EMBEDDINGS_PATH = FIXTURES / "mini_embeddings_d8.txt"
TOY_CORPUS_PATH = FIXTURES / "toy_twitter_train.tsv"
POS_LEXICON_PATH = FIXTURES / "pos_lexicon.tsv"
PAIR_SCORES_PATH = FIXTURES / "pair_scores.tsv"


@pytest.fixture(scope="session")
def table():
    return load_pretrained(EMBEDDINGS_PATH)


@pytest.fixture()
def provider():
    return LexicalSimilarityProvider.load(POS_LEXICON_PATH, PAIR_SCORES_PATH)


def tiny_model_config(**overrides):
    """A model small enough that training the toy corpus takes milliseconds."""
    base = dict(
        ablation="deep",
        dataset_profile="twitter",
        encoder=EncoderConfig(filter_widths=(2, 3), filters_per_width=4, lstm_hidden=6),
        wordsim=WordSimConfig(sim_filters=3, sim_filter_width=2, sim_channels=8),
        hidden_layers=(8,),
        epochs=3,
        batch_size=8,
        seed=0,
        min_len=3,
        dropout=0.0,
        lr=1.0,
    )
    base.update(overrides)
    return ModelConfig(**base)


# --- finite-difference oracle -------------------------------------------------
#
# Central differences around the current tensor values.  This is the
# independent check for every analytic backward rule: it never looks at the
# graph, only at forward evaluations.

FD_STEP = 1e-5


def fd_gradient(loss_fn, tensor: ad.Tensor, step: float = FD_STEP) -> np.ndarray:
    flat = tensor.values.reshape(-1)
    grad = np.zeros_like(flat)
    for i in range(flat.size):
        saved = flat[i]
        flat[i] = saved + step
        up = loss_fn().item()
        flat[i] = saved - step
        down = loss_fn().item()
        flat[i] = saved
        grad[i] = (up - down) / (2.0 * step)
    return grad.reshape(tensor.values.shape)


def max_rel_err(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-4) -> float:
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float((np.abs(analytic - numeric) / scale).max())


def assert_grads_match(loss_fn, tensors, tol: float = 1e-4) -> None:
    """Analytic gradients of loss_fn wrt each tensor match central differences."""
    for t in tensors:
        t.grad = None
    loss = loss_fn()
    ad.backward(loss)
    for t in tensors:
        analytic = np.zeros_like(t.values) if t.grad is None else t.grad.copy()
        t.grad = None
        numeric = fd_gradient(loss_fn, t)
        err = max_rel_err(analytic, numeric)
        assert err < tol, f"gradient mismatch for {t.name or t.shape}: rel err {err}"
