"""Sentence-pair paraphrase detection.

A CNN-plus-LSTM sentence encoder, pair-wise word-similarity matching
features, and statistical text features feed a small trainable classifier
head.  Gradients come from the package's own reverse-mode tape; training
uses Adadelta.  See the README for the CLI.
"""

from .autodiff import Tensor, backward, zero_grad
from .corpus import Corpus, SentencePair, augment_swap, load_msrp, load_twitter, pad_and_batch
from .embeddings import EmbeddingTable, Vocabulary, embed_sentence, load_pretrained, tokenize
from .encoder import EncoderConfig, EncoderParams, encode_sentence, pair_difference
from .features import (
    LexicalSimilarityProvider,
    StatFeatureVector,
    bow_cosine,
    build_features,
    build_idf,
    ngram_overlap,
    pos_bucket_similarity,
    repr_cosine,
    tfidf_similarity,
)
from .model import ModelConfig, ModelParameters, PairModel
from .optim import AdadeltaState, adadelta_step
from .training import EvaluationReport, Trainer, evaluate, learning_curve, train
from .wordsim import WordSimConfig, WordSimParams, match_features, similarity_matrix

__version__ = "0.1.0"

__all__ = [
    "Tensor",
    "backward",
    "zero_grad",
    "Corpus",
    "SentencePair",
    "augment_swap",
    "load_msrp",
    "load_twitter",
    "pad_and_batch",
    "EmbeddingTable",
    "Vocabulary",
    "embed_sentence",
    "load_pretrained",
    "tokenize",
    "EncoderConfig",
    "EncoderParams",
    "encode_sentence",
    "pair_difference",
    "LexicalSimilarityProvider",
    "StatFeatureVector",
    "bow_cosine",
    "build_features",
    "build_idf",
    "ngram_overlap",
    "pos_bucket_similarity",
    "repr_cosine",
    "tfidf_similarity",
    "ModelConfig",
    "ModelParameters",
    "PairModel",
    "AdadeltaState",
    "adadelta_step",
    "EvaluationReport",
    "Trainer",
    "evaluate",
    "learning_curve",
    "train",
    "WordSimConfig",
    "WordSimParams",
    "match_features",
    "similarity_matrix",
]
