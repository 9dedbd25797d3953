"""Model configuration, parameter construction, and the pair forward pass.

Four ablations share one head: ``sentmod`` feeds it the signed difference of
the two sentence encodings, ``pairwise`` the word-similarity matching vector,
``deep`` both, and ``augdeep`` additionally the statistical feature vector
for the dataset profile.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .embeddings import EmbeddingTable, embed_sentence
from .encoder import EncoderConfig, EncoderParams, encode_sentence, glorot, pair_difference
from .errors import ShapeError
from .features import PROFILE_FEATURES, LexicalSimilarityProvider, build_features
from .wordsim import WordSimConfig, WordSimParams, match_features, similarity_matrix

ABLATIONS = ("sentmod", "pairwise", "deep", "augdeep")
PROFILES = ("twitter", "msrp")

# Training hyperparameters tuned per corpus; used when the config leaves
# lr or dropout unset.
PROFILE_DEFAULTS = {
    "twitter": {"lr": 0.70, "dropout": 0.2},
    "msrp": {"lr": 0.9, "dropout": 0.5},
}

PRED_CLAMP = 1e-7  # keeps reported probabilities strictly inside (0, 1)


@dataclass
class ModelConfig:
    ablation: str = "deep"
    dataset_profile: str = "twitter"
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    wordsim: WordSimConfig = field(default_factory=WordSimConfig)
    hidden_layers: tuple[int, ...] = (64,)
    lr: float | None = None
    dropout: float | None = None
    epochs: int = 10
    batch_size: int = 32
    seed: int = 0
    augment: bool = False
    min_len: int = 5
    threshold: float = 0.5
    absolute_difference: bool = False
    finetune_embeddings: bool = False

    def resolve(self, embedding_dim: int) -> "ModelConfig":
        """Fill profile defaults and the embedding dimension; validate."""
        if self.ablation not in ABLATIONS:
            raise ValueError(f"config: unknown ablation {self.ablation!r}")
        if self.dataset_profile not in PROFILES:
            raise ValueError(f"config: unknown dataset profile {self.dataset_profile!r}")
        defaults = PROFILE_DEFAULTS[self.dataset_profile]
        if self.lr is None:
            self.lr = defaults["lr"]
        if self.dropout is None:
            self.dropout = defaults["dropout"]
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"config: dropout must be in [0, 1), got {self.dropout}")
        if self.lr <= 0.0:
            raise ValueError(f"config: lr must be positive, got {self.lr}")
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("config: epochs must be >= 0 and batch_size >= 1")
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError(f"config: threshold must be in [0, 1], got {self.threshold}")
        self.encoder.embedding_dim = embedding_dim
        self.encoder.dropout_rate = self.dropout
        if self.min_len < max(self.encoder.filter_widths):
            raise ValueError(
                f"config: min_len {self.min_len} shorter than widest filter "
                f"{max(self.encoder.filter_widths)}"
            )
        self.uses_encoder  # touch the ablation-dependent properties early
        return self

    @property
    def uses_encoder(self) -> bool:
        return self.ablation in ("sentmod", "deep", "augdeep")

    @property
    def uses_wordsim(self) -> bool:
        return self.ablation in ("pairwise", "deep", "augdeep")

    @property
    def uses_stat_features(self) -> bool:
        return self.ablation == "augdeep"

    @property
    def stat_feature_count(self) -> int:
        return len(PROFILE_FEATURES[self.dataset_profile])

    def head_input_size(self) -> int:
        size = 0
        if self.uses_encoder:
            size += self.encoder.lstm_hidden
        if self.uses_wordsim:
            size += self.wordsim.output_size
        if self.uses_stat_features:
            size += self.stat_feature_count
        return size

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ModelConfig":
        data = dict(data)
        data["encoder"] = EncoderConfig(**{**data.get("encoder", {}),
                                           "filter_widths": tuple(data.get("encoder", {}).get("filter_widths", (3, 4)))})
        data["wordsim"] = WordSimConfig(**data.get("wordsim", {}))
        data["hidden_layers"] = tuple(data.get("hidden_layers", (64,)))
        return cls(**data)


@dataclass
class ModelParameters:
    """All trainable tensors, grouped by component."""

    encoder: EncoderParams | None = None
    wordsim: WordSimParams | None = None
    head: list[tuple[Tensor, Tensor]] = field(default_factory=list)
    embeddings: Tensor | None = None  # present only when fine-tuning

    @classmethod
    def init(cls, config: ModelConfig, rng: np.random.Generator,
             table: EmbeddingTable | None = None) -> "ModelParameters":
        params = cls()
        if config.uses_encoder:
            params.encoder = EncoderParams.init(config.encoder, rng)
        if config.uses_wordsim:
            params.wordsim = WordSimParams.init(config.wordsim, rng)
        size_in = config.head_input_size()
        for i, width in enumerate(config.hidden_layers):
            w = Tensor(glorot(rng, (width, size_in), fan_in=size_in, fan_out=width),
                       requires_grad=True, name=f"head.h{i}.w")
            b = Tensor(np.zeros(width), requires_grad=True, name=f"head.h{i}.b")
            params.head.append((w, b))
            size_in = width
        w = Tensor(glorot(rng, (1, size_in), fan_in=size_in, fan_out=1),
                   requires_grad=True, name="head.out.w")
        b = Tensor(np.zeros(1), requires_grad=True, name="head.out.b")
        params.head.append((w, b))
        if config.finetune_embeddings:
            if table is None:
                raise ValueError("finetune_embeddings requires the embedding table at init")
            table.set_trainable(True)
            params.embeddings = table.vectors
        return params

    def named(self) -> dict[str, Tensor]:
        """Stable name -> tensor map used by the optimizer and checkpoints."""
        out: dict[str, Tensor] = {}
        if self.encoder is not None:
            out.update(self.encoder.named())
        if self.wordsim is not None:
            out.update(self.wordsim.named())
        for w, b in self.head:
            out[w.name] = w
            out[b.name] = b
        if self.embeddings is not None:
            out["emb.vectors"] = self.embeddings
        return out

    def tensors(self) -> list[Tensor]:
        return list(self.named().values())


@dataclass
class PairModel:
    """Bundles everything needed to score a sentence pair."""

    config: ModelConfig
    params: ModelParameters
    table: EmbeddingTable
    provider: LexicalSimilarityProvider | None = None
    idf: dict[str, float] | None = None

    @classmethod
    def build(cls, config: ModelConfig, table: EmbeddingTable,
              provider: LexicalSimilarityProvider | None = None,
              idf: dict[str, float] | None = None) -> "PairModel":
        config.resolve(table.dimension)
        rng = np.random.default_rng(np.random.SeedSequence([config.seed, 0]))
        params = ModelParameters.init(config, rng, table=table)
        return cls(config=config, params=params, table=table, provider=provider, idf=idf)

    def forward_pair(self, padded1: list[str], padded2: list[str],
                     mode: str = "eval", rng=None) -> Tensor:
        """Probability that the pair is a paraphrase, as a scalar tensor.

        The output is clamped into [1e-7, 1 - 1e-7], so it is strictly inside
        (0, 1) for any finite input and a threshold of 1.0 is unreachable.
        """
        cfg = self.config
        pieces: list[Tensor] = []
        v1 = v2 = None
        e1 = embed_sentence(padded1, self.table)
        e2 = embed_sentence(padded2, self.table)

        if cfg.uses_encoder:
            v1 = encode_sentence(e1, cfg.encoder, self.params.encoder, mode=mode, rng=rng)
            v2 = encode_sentence(e2, cfg.encoder, self.params.encoder, mode=mode, rng=rng)
            diff = pair_difference(v1, v2)
            if cfg.absolute_difference:
                diff = ad.absolute(diff)
            pieces.append(diff)

        if cfg.uses_wordsim:
            sim = similarity_matrix(e1, e2, use_cosine=cfg.wordsim.use_cosine)
            pieces.append(match_features(sim, cfg.wordsim, self.params.wordsim))

        if cfg.uses_stat_features:
            stats = build_features(
                padded1, padded2,
                encodings=(v1.values, v2.values),
                provider=self.provider,
                dataset_profile=cfg.dataset_profile,
                idf=self.idf,
            )
            # Token-derived statistics are constants of the pair, but the
            # representation cosine depends on the encoder, so it enters the
            # graph as a differentiable slot rather than a frozen value.
            i = stats.names.index("repr_cosine")
            cos = ad.reshape(
                ad.pairwise_dot(
                    ad.normalize_columns(ad.reshape(v1, (v1.shape[0], 1))),
                    ad.normalize_columns(ad.reshape(v2, (v2.shape[0], 1))),
                ),
                (1,),
            )
            if i > 0:
                pieces.append(Tensor(stats.values[:i]))
            pieces.append(cos)
            if i + 1 < len(stats.values):
                pieces.append(Tensor(stats.values[i + 1:]))

        features = pieces[0] if len(pieces) == 1 else ad.concat(pieces, axis=0)
        expected = cfg.head_input_size()
        if features.shape != (expected,):
            raise ShapeError(
                f"forward_pair: assembled feature vector {features.shape} != ({expected},) "
                f"required by the head"
            )

        x = features
        *hidden, (w_out, b_out) = self.params.head
        for w, b in hidden:
            x = ad.dense(x, w, b, activation="relu")
            if mode == "train" and cfg.dropout > 0.0:
                x = ad.dropout(x, cfg.dropout, "train", rng)
        prob = ad.dense(x, w_out, b_out, activation="sigmoid")
        return ad.clip(prob, PRED_CLAMP, 1.0 - PRED_CLAMP)

    def predict_proba(self, padded1: list[str], padded2: list[str]) -> float:
        return self.forward_pair(padded1, padded2, mode="eval").item()
