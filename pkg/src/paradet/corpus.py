"""Corpus loading, label mapping, augmentation, padding, and batching.

Two tab-separated formats are supported: the Twitter paraphrase corpus
(judgment-pair labels on train/dev, single integer labels on test) and the
MSR paraphrase corpus (header line, quality bit).  Pairs whose label falls
in the debatable band are excluded from the loaded corpus and counted.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field, replace

import numpy as np

from .embeddings import PAD_TOKEN, tokenize
from .errors import DataError, open_text

log = logging.getLogger(__name__)

_JUDGMENT = re.compile(r"^\((\d+)\s*,\s*(\d+)\)$")


@dataclass
class SentencePair:
    """One corpus entry; ``label`` is 1 for paraphrase, 0 otherwise."""

    tokens1: list[str]
    tokens2: list[str]
    label: int
    id: str
    augmented: bool = False


@dataclass
class Corpus:
    split: str  # train | dev | test
    source: str  # twitter | msrp
    pairs: list[SentencePair] = field(default_factory=list)
    debatable_excluded: int = 0

    def __len__(self) -> int:
        return len(self.pairs)

    def labels(self) -> np.ndarray:
        return np.array([p.label for p in self.pairs], dtype=np.int64)

    def count(self, label: int) -> int:
        return sum(1 for p in self.pairs if p.label == label)


def _twitter_label(raw: str, split: str, path, line_no: int) -> int | None:
    """Map a raw label field to 1/0, or None for the debatable band."""
    if split in ("train", "dev"):
        m = _JUDGMENT.match(raw.strip())
        if not m:
            raise DataError(f"expected '(k, m)' judgment label, found {raw!r}", path=path, line=line_no)
        k = int(m.group(1))
        if k >= 3:
            return 1
        if k <= 1:
            return 0
        return None  # k == 2: debatable
    try:
        value = int(raw.strip())
    except ValueError:
        raise DataError(f"expected integer label, found {raw!r}", path=path, line=line_no) from None
    if not 0 <= value <= 5:
        raise DataError(f"test label {value} outside 0..5", path=path, line=line_no)
    if value >= 4:
        return 1
    if value <= 2:
        return 0
    return None  # 3: debatable


def load_twitter(path, split: str) -> Corpus:
    """Load a Twitter-format TSV: topic_id, topic, sent1, sent2, label[, ...].

    Train/dev labels are "(k, 5-k)" judgment pairs: k >= 3 paraphrase,
    k <= 1 non-paraphrase, k == 2 debatable (excluded).  Test labels are
    single integers: 4-5 paraphrase, 0-2 non-paraphrase, 3 debatable.
    """
    if split not in ("train", "dev", "test"):
        raise ValueError(f"load_twitter: unknown split {split!r}")
    corpus = Corpus(split=split, source="twitter")
    with open_text(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) < 5:
                raise DataError(f"expected at least 5 tab-separated fields, found {len(parts)}",
                                path=path, line=line_no)
            _, _, sent1, sent2, raw_label = parts[:5]
            label = _twitter_label(raw_label, split, path, line_no)
            if label is None:
                corpus.debatable_excluded += 1
                continue
            corpus.pairs.append(SentencePair(
                tokens1=tokenize(sent1),
                tokens2=tokenize(sent2),
                label=label,
                id=f"{split}-{line_no}",
            ))
    log.info(
        "loaded %s/%s: %d pairs (%d paraphrase, %d non-paraphrase), %d debatable excluded",
        corpus.source, split, len(corpus), corpus.count(1), corpus.count(0),
        corpus.debatable_excluded,
    )
    return corpus


def load_msrp(path, split: str) -> Corpus:
    """Load an MSRP-format TSV: quality, id1, id2, sent1, sent2 with a header."""
    if split not in ("train", "test"):
        raise ValueError(f"load_msrp: unknown split {split!r}")
    corpus = Corpus(split=split, source="msrp")
    with open_text(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if line_no == 1 and parts and parts[0].strip().lower() == "quality":
                continue  # header
            if line_no == 1:
                log.warning("%s: no header line found, parsing from the first line", path)
            if len(parts) != 5:
                raise DataError(f"expected 5 tab-separated fields, found {len(parts)}",
                                path=path, line=line_no)
            quality, _, _, sent1, sent2 = parts
            if quality.strip() not in ("0", "1"):
                raise DataError(f"quality must be 0 or 1, found {quality!r}", path=path, line=line_no)
            corpus.pairs.append(SentencePair(
                tokens1=tokenize(sent1),
                tokens2=tokenize(sent2),
                label=int(quality),
                id=f"{split}-{line_no}",
            ))
    log.info(
        "loaded %s/%s: %d pairs (%d paraphrase, %d non-paraphrase)",
        corpus.source, split, len(corpus), corpus.count(1), corpus.count(0),
    )
    return corpus


def augment_swap(corpus: Corpus) -> Corpus:
    """Double a training corpus by appending every pair with sentences swapped.

    Labels are preserved; swapped copies are flagged ``augmented``.  Dev and
    test splits are refused so evaluation sets can never be inflated.
    """
    if corpus.split != "train":
        raise ValueError(f"augment_swap: refusing to augment the {corpus.split!r} split")
    swapped = [
        replace(p, tokens1=list(p.tokens2), tokens2=list(p.tokens1),
                id=p.id + "-swap", augmented=True)
        for p in corpus.pairs
    ]
    return Corpus(
        split=corpus.split,
        source=corpus.source,
        pairs=list(corpus.pairs) + swapped,
        debatable_excluded=corpus.debatable_excluded,
    )


@dataclass
class PaddedPair:
    """A sentence pair with right-padded token lists for the encoder; the
    original pair stays available so statistical features ignore padding."""

    padded1: list[str]
    padded2: list[str]
    source: SentencePair

    @property
    def label(self) -> int:
        return self.source.label


def pad_tokens(tokens: list[str], min_len: int) -> list[str]:
    if len(tokens) >= min_len:
        return list(tokens)
    return list(tokens) + [PAD_TOKEN] * (min_len - len(tokens))


def pad_and_batch(
    corpus: Corpus,
    min_len: int = 5,
    batch_size: int = 32,
    seed: int | None = 0,
) -> list[list[PaddedPair]]:
    """Pad every sentence to at least ``min_len`` and group pairs into batches.

    The train split is shuffled with the given seed (same seed, same order);
    dev and test keep file order.  The final batch may be smaller.
    """
    if batch_size < 1:
        raise ValueError(f"pad_and_batch: batch_size must be positive, got {batch_size}")
    if min_len < 1:
        raise ValueError(f"pad_and_batch: min_len must be positive, got {min_len}")
    order = np.arange(len(corpus.pairs))
    if corpus.split == "train":
        order = np.random.default_rng(seed).permutation(order)
    padded = [
        PaddedPair(
            padded1=pad_tokens(corpus.pairs[i].tokens1, min_len),
            padded2=pad_tokens(corpus.pairs[i].tokens2, min_len),
            source=corpus.pairs[i],
        )
        for i in order
    ]
    return [padded[i : i + batch_size] for i in range(0, len(padded), batch_size)]
