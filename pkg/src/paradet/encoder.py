"""Sentence encoder: parallel 1-D convolutions, pooling, then an LSTM.

Each filter width convolves the embedded sentence, passes through ReLU, and
is max-pooled down to half length (window 2, stride 2, odd tail kept).  The
pooled maps are concatenated along the sequence axis and fed column-by-column
to an LSTM; the final hidden state is the sentence vector.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import LstmWeights, Tensor
from .errors import ShapeError


@dataclass
class EncoderConfig:
    filter_widths: tuple[int, ...] = (3, 4)
    filters_per_width: int = 64
    lstm_hidden: int = 128
    dropout_rate: float = 0.0
    embedding_dim: int = 0  # filled in when the embedding table is known

    def validate(self) -> None:
        if not self.filter_widths or any(w < 1 for w in self.filter_widths):
            raise ValueError(f"encoder: bad filter widths {self.filter_widths}")
        if len(set(self.filter_widths)) != len(self.filter_widths):
            raise ValueError(f"encoder: duplicate filter widths {self.filter_widths}")
        if self.filters_per_width < 1 or self.lstm_hidden < 1:
            raise ValueError("encoder: filter count and LSTM size must be positive")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError(f"encoder: dropout_rate must be in [0, 1), got {self.dropout_rate}")
        if self.embedding_dim < 1:
            raise ValueError("encoder: embedding_dim not set")


def glorot(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int, fan_out: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape)


@dataclass
class EncoderParams:
    """Convolution filters keyed by width, plus the LSTM weight set."""

    conv: dict[int, tuple[Tensor, Tensor]] = field(default_factory=dict)
    lstm: LstmWeights | None = None

    @classmethod
    def init(cls, config: EncoderConfig, rng: np.random.Generator) -> "EncoderParams":
        config.validate()
        d, k, y = config.embedding_dim, config.filters_per_width, config.lstm_hidden
        conv = {}
        for p in config.filter_widths:
            w = Tensor(glorot(rng, (k, d, p), fan_in=d * p, fan_out=k * p),
                       requires_grad=True, name=f"enc.conv.w{p}")
            b = Tensor(np.zeros(k), requires_grad=True, name=f"enc.conv.b{p}")
            conv[p] = (w, b)

        def w_gate(name):
            return Tensor(glorot(rng, (y, k), fan_in=k, fan_out=y), requires_grad=True, name=name)

        def u_gate(name):
            return Tensor(glorot(rng, (y, y), fan_in=y, fan_out=y), requires_grad=True, name=name)

        def b_gate(name):
            return Tensor(np.zeros(y), requires_grad=True, name=name)

        lstm = LstmWeights(
            wi=w_gate("enc.lstm.Wi"), ui=u_gate("enc.lstm.Ui"), bi=b_gate("enc.lstm.bi"),
            wf=w_gate("enc.lstm.Wf"), uf=u_gate("enc.lstm.Uf"), bf=b_gate("enc.lstm.bf"),
            wo=w_gate("enc.lstm.Wo"), uo=u_gate("enc.lstm.Uo"), bo=b_gate("enc.lstm.bo"),
            wc=w_gate("enc.lstm.Wc"), uc=u_gate("enc.lstm.Uc"), bc=b_gate("enc.lstm.bc"),
        )
        return cls(conv=conv, lstm=lstm)

    def named(self) -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        for p in sorted(self.conv):
            w, b = self.conv[p]
            out[f"enc.conv.w{p}"] = w
            out[f"enc.conv.b{p}"] = b
        for t in self.lstm.tensors():
            out[t.name] = t
        return out


def encode_sentence(
    embeddings: Tensor,
    config: EncoderConfig,
    params: EncoderParams,
    mode: str = "eval",
    rng=None,
) -> Tensor:
    """Encode a (d, m) embedded sentence into a (lstm_hidden,) vector.

    The sentence must be at least as long as the widest filter; the padding
    policy upstream guarantees that for corpus data.  Dropout applies to the
    concatenated convolution output, in train mode only.
    """
    d, m = embeddings.shape
    widest = max(config.filter_widths)
    if m < widest:
        raise ShapeError(
            f"encode_sentence: sentence length {m} shorter than widest filter {widest}; "
            f"pad sentences to at least {widest} tokens"
        )
    if d != config.embedding_dim:
        raise ShapeError(f"encode_sentence: embedding dim {d} != configured {config.embedding_dim}")

    pooled = []
    for p in config.filter_widths:
        w, b = params.conv[p]
        fmap = ad.relu(ad.conv1d(embeddings, w, b))
        pooled.append(ad.halving_max_pool(fmap))
    seq = pooled[0] if len(pooled) == 1 else ad.concat(pooled, axis=1)
    if mode == "train" and config.dropout_rate > 0.0:
        if rng is None:
            raise ValueError("encode_sentence: train mode with dropout needs an rng")
        seq = ad.dropout(seq, config.dropout_rate, "train", rng)
    return ad.lstm_forward(seq, params.lstm)


def pair_difference(v1: Tensor, v2: Tensor) -> Tensor:
    """Signed difference of two sentence vectors; antisymmetric by design."""
    if v1.shape != v2.shape:
        raise ShapeError(f"pair_difference: shapes {v1.shape} and {v2.shape} differ")
    return ad.sub(v1, v2)
