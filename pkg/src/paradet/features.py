"""Statistical sentence-pair features and the lexical similarity provider.

Everything here works on plain token lists and returns floats; the model
wraps the assembled vector as a constant tensor, so no gradient flows into
these features.  PAD tokens are stripped before any computation.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .embeddings import PAD_TOKEN
from .errors import DataError, open_text

POS_TAGS = ("V", "N", "A", "O")
_BUCKET_TAG = {"verb": "V", "noun": "N", "adj": "A"}

FEATURE_NAMES = (
    "tfidf_sim",
    "bow_cosine",
    "verb_sim",
    "noun_sim",
    "adj_sim",
    "repr_cosine",
    "unigram_overlap_s1",
    "unigram_overlap_s2",
    "bigram_overlap_s1",
    "bigram_overlap_s2",
    "trigram_overlap_s1",
    "trigram_overlap_s2",
)

# Per-dataset feature subsets, as indices into FEATURE_NAMES.
PROFILE_FEATURES = {
    "msrp": tuple(range(12)),
    "twitter": tuple(range(5, 12)),
}


def _distinct_ngrams(tokens: list[str], n: int) -> set[tuple[str, ...]]:
    return {tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1)}


def ngram_overlap(tokens1: list[str], tokens2: list[str]) -> tuple[float, ...]:
    """Shared distinct n-gram fractions for n in 1..3, relative to each side.

    Returns (uni_s1, uni_s2, bi_s1, bi_s2, tri_s1, tri_s2) where the _s1
    variant divides the shared count by the distinct n-grams of sentence one.
    A side with no n-grams of that order scores 0.
    """
    out = []
    for n in (1, 2, 3):
        g1 = _distinct_ngrams(tokens1, n)
        g2 = _distinct_ngrams(tokens2, n)
        shared = len(g1 & g2)
        out.append(shared / len(g1) if g1 else 0.0)
        out.append(shared / len(g2) if g2 else 0.0)
    return tuple(out)


def _cosine_from_counts(c1: Counter, c2: Counter, weight=None) -> float:
    if not c1 or not c2:
        return 0.0
    keys = set(c1) | set(c2)
    w = weight or {}
    v1 = np.array([c1.get(k, 0) * w.get(k, 1.0) for k in sorted(keys)])
    v2 = np.array([c2.get(k, 0) * w.get(k, 1.0) for k in sorted(keys)])
    n1 = np.linalg.norm(v1)
    n2 = np.linalg.norm(v2)
    if n1 == 0.0 or n2 == 0.0:
        return 0.0
    return float(v1 @ v2 / (n1 * n2))


def build_idf(sentences) -> dict[str, float]:
    """Smoothed inverse document frequency over an iterable of token lists.

    idf(t) = ln((1 + N) / (1 + df(t))) + 1 with each sentence as a document.
    """
    sentences = list(sentences)
    n_docs = len(sentences)
    df: Counter = Counter()
    for tokens in sentences:
        df.update(set(tokens))
    return {t: math.log((1 + n_docs) / (1 + d)) + 1.0 for t, d in df.items()}


def tfidf_similarity(tokens1: list[str], tokens2: list[str], idf: dict[str, float]) -> float:
    """Cosine of TF-IDF vectors; tokens missing from ``idf`` weigh 1.0."""
    t1 = [t for t in tokens1 if t != PAD_TOKEN]
    t2 = [t for t in tokens2 if t != PAD_TOKEN]
    return _cosine_from_counts(Counter(t1), Counter(t2), weight=idf)


def bow_cosine(tokens1: list[str], tokens2: list[str]) -> float:
    """Cosine of raw token count vectors."""
    t1 = [t for t in tokens1 if t != PAD_TOKEN]
    t2 = [t for t in tokens2 if t != PAD_TOKEN]
    return _cosine_from_counts(Counter(t1), Counter(t2))


@dataclass
class LexicalSimilarityProvider:
    """Token tags and pair scores loaded from two TSV files.

    The POS lexicon maps a token to one of {V, N, A, O}; the score table maps
    unordered token pairs to a similarity in [0, 1].  Missing pairs score 0.
    """

    pos_lexicon: dict[str, str]
    pair_scores: dict[tuple[str, str], float]

    @staticmethod
    def _pair_key(a: str, b: str) -> tuple[str, str]:
        return (a, b) if a <= b else (b, a)

    def tag(self, token: str) -> str | None:
        return self.pos_lexicon.get(token)

    def score(self, a: str, b: str) -> float:
        return self.pair_scores.get(self._pair_key(a, b), 0.0)

    @classmethod
    def load(cls, pos_path, scores_path) -> "LexicalSimilarityProvider":
        lexicon: dict[str, str] = {}
        for line_no, parts in _tsv_lines(pos_path):
            if len(parts) != 2:
                raise DataError(f"expected 'token<TAB>tag', found {len(parts)} fields",
                                path=pos_path, line=line_no)
            token, tag = parts
            if tag not in POS_TAGS:
                raise DataError(f"unknown tag {tag!r} (expected one of {POS_TAGS})",
                                path=pos_path, line=line_no)
            lexicon[token] = tag

        scores: dict[tuple[str, str], float] = {}
        for line_no, parts in _tsv_lines(scores_path):
            if len(parts) != 3:
                raise DataError(f"expected 'token<TAB>token<TAB>score', found {len(parts)} fields",
                                path=scores_path, line=line_no)
            a, b, raw = parts
            try:
                value = float(raw)
            except ValueError:
                raise DataError(f"bad score {raw!r}", path=scores_path, line=line_no) from None
            if not 0.0 <= value <= 1.0:
                raise DataError(f"score {value} outside [0, 1]", path=scores_path, line=line_no)
            scores[cls._pair_key(a, b)] = value
        return cls(lexicon, scores)


def _tsv_lines(path):
    with open_text(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            yield line_no, line.split("\t")


def pos_bucket_similarity(
    tokens1: list[str],
    tokens2: list[str],
    bucket: str,
    provider: LexicalSimilarityProvider,
) -> float:
    """Align same-POS tokens across the pair and average the best matches.

    For each token of the bucket in sentence one, take its maximum provider
    score against the bucket tokens of sentence two; average those maxima.
    Do the same in reverse and return the mean of the two directions.
    Either bucket empty -> 0.
    """
    if bucket not in _BUCKET_TAG:
        raise ValueError(f"pos_bucket_similarity: unknown bucket {bucket!r}")
    tag = _BUCKET_TAG[bucket]
    b1 = [t for t in tokens1 if t != PAD_TOKEN and provider.tag(t) == tag]
    b2 = [t for t in tokens2 if t != PAD_TOKEN and provider.tag(t) == tag]
    if not b1 or not b2:
        return 0.0
    forward = sum(max(provider.score(a, b) for b in b2) for a in b1) / len(b1)
    backward = sum(max(provider.score(b, a) for a in b1) for b in b2) / len(b2)
    return (forward + backward) / 2.0


def repr_cosine(v1, v2) -> float:
    """Cosine between two sentence representation vectors; zero norm -> 0."""
    a = np.asarray(getattr(v1, "values", v1), dtype=np.float64).ravel()
    b = np.asarray(getattr(v2, "values", v2), dtype=np.float64).ravel()
    n1 = np.linalg.norm(a)
    n2 = np.linalg.norm(b)
    if n1 == 0.0 or n2 == 0.0:
        return 0.0
    return float(a @ b / (n1 * n2))


@dataclass
class StatFeatureVector:
    """Assembled feature values with their names; ``degraded`` flags features
    zeroed for lack of provider data."""

    values: np.ndarray
    names: tuple[str, ...]
    degraded: bool = False


def build_features(
    tokens1: list[str],
    tokens2: list[str],
    encodings=None,
    provider: LexicalSimilarityProvider | None = None,
    dataset_profile: str = "twitter",
    idf: dict[str, float] | None = None,
) -> StatFeatureVector:
    """Assemble the statistical feature vector for one sentence pair.

    The twitter profile uses the representation cosine and the six n-gram
    overlap fractions (7 values); msrp prepends TF-IDF cosine, bag-of-words
    cosine, and the three POS-bucket similarities (12 values).  Features
    whose inputs are unavailable (no provider, no encodings) degrade to 0
    and set the ``degraded`` flag.  PAD tokens never contribute.
    """
    if dataset_profile not in PROFILE_FEATURES:
        raise ValueError(f"build_features: unknown profile {dataset_profile!r}")
    t1 = [t for t in tokens1 if t != PAD_TOKEN]
    t2 = [t for t in tokens2 if t != PAD_TOKEN]

    degraded = False
    table: dict[str, float] = {}
    overlap = ngram_overlap(t1, t2)
    for name, value in zip(FEATURE_NAMES[6:], overlap):
        table[name] = value

    if encodings is not None:
        table["repr_cosine"] = repr_cosine(*encodings)
    else:
        table["repr_cosine"] = 0.0
        degraded = True

    if dataset_profile == "msrp":
        table["tfidf_sim"] = tfidf_similarity(t1, t2, idf or {})
        table["bow_cosine"] = bow_cosine(t1, t2)
        if provider is None:
            table["verb_sim"] = table["noun_sim"] = table["adj_sim"] = 0.0
            degraded = True
        else:
            table["verb_sim"] = pos_bucket_similarity(t1, t2, "verb", provider)
            table["noun_sim"] = pos_bucket_similarity(t1, t2, "noun", provider)
            table["adj_sim"] = pos_bucket_similarity(t1, t2, "adj", provider)

    names = tuple(FEATURE_NAMES[i] for i in PROFILE_FEATURES[dataset_profile])
    values = np.array([table[n] for n in names])
    return StatFeatureVector(values=values, names=names, degraded=degraded)
