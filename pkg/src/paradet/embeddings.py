"""Tokenization, vocabulary, and pretrained word vectors.

The embedding table is frozen by default; enabling ``trainable`` registers
it with the optimizer and routes gradients into the looked-up rows.  The PAD
row is all zeros and never receives gradient, so padded positions contribute
nothing to convolutions or similarity matrices.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor, _node
from .errors import DataError, open_text

PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"

# The UNK vector is part of the data contract, not of any experiment, so its
# seed is a fixed constant independent of run configuration.
_UNK_SEED = 0x5EED
_UNK_RANGE = 0.05


def tokenize(text: str) -> list[str]:
    """Lowercase and split into word and punctuation tokens.

    Splits on Unicode whitespace; every punctuation character (Unicode
    category P*) becomes its own token, even inside a word: "don't stop!"
    -> [don, ', t, stop, !].  Empty input gives an empty list.
    """
    tokens: list[str] = []
    for chunk in text.lower().split():
        run = []
        for ch in chunk:
            if unicodedata.category(ch).startswith("P"):
                if run:
                    tokens.append("".join(run))
                    run = []
                tokens.append(ch)
            else:
                run.append(ch)
        if run:
            tokens.append("".join(run))
    return tokens


@dataclass
class Vocabulary:
    """Token-to-index map with PAD and UNK always present."""

    token_to_index: dict[str, int] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.token_to_index)

    def __contains__(self, token: str) -> bool:
        return token in self.token_to_index

    @property
    def pad_index(self) -> int:
        return self.token_to_index[PAD_TOKEN]

    @property
    def unk_index(self) -> int:
        return self.token_to_index[UNK_TOKEN]

    def index(self, token: str) -> int:
        """Index of ``token``, falling back to UNK."""
        return self.token_to_index.get(token, self.token_to_index[UNK_TOKEN])


@dataclass
class EmbeddingTable:
    """Word vectors keyed by a vocabulary; one row per token."""

    vocab: Vocabulary
    vectors: Tensor
    trainable: bool = False

    @property
    def dimension(self) -> int:
        return self.vectors.shape[1]

    def set_trainable(self, trainable: bool) -> None:
        self.trainable = trainable
        self.vectors.requires_grad = trainable


def load_pretrained(path, expected_dim: int | None = None, trainable: bool = False) -> EmbeddingTable:
    """Load a text-format embedding file: one ``token v1 .. vd`` line each.

    Tokens keep file order; PAD and UNK rows are appended after them.  PAD is
    all zeros; UNK is drawn uniform(-0.05, 0.05) from a fixed seed so every
    load of the same file yields the same table.  A line whose float count
    disagrees with the first line (or ``expected_dim``) raises
    :class:`DataError` naming the line.
    """
    tokens: list[str] = []
    seen: set[str] = set()
    rows: list[np.ndarray] = []
    dim = expected_dim
    with open_text(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split(" ")
            token, values = parts[0], parts[1:]
            if not token:
                raise DataError("empty token field", path=path, line=line_no)
            if dim is None:
                dim = len(values)
                if dim == 0:
                    raise DataError("no vector values on first line", path=path, line=line_no)
            if len(values) != dim:
                raise DataError(
                    f"expected {dim} vector values, found {len(values)}", path=path, line=line_no
                )
            try:
                row = np.array([float(v) for v in values])
            except ValueError as exc:
                raise DataError(f"bad float: {exc}", path=path, line=line_no) from None
            if token in (PAD_TOKEN, UNK_TOKEN):
                raise DataError(f"reserved token {token!r} in embedding file", path=path, line=line_no)
            if token in seen:
                raise DataError(f"duplicate token {token!r}", path=path, line=line_no)
            seen.add(token)
            tokens.append(token)
            rows.append(row)

    if dim is None:
        raise DataError("empty embedding file and no expected dimension given", path=path)

    rng = np.random.default_rng(_UNK_SEED)
    unk_row = rng.uniform(-_UNK_RANGE, _UNK_RANGE, size=dim)
    matrix = np.zeros((len(tokens) + 2, dim))
    if rows:
        matrix[: len(rows)] = np.stack(rows)
    matrix[len(tokens) + 1] = unk_row  # PAD row at len(tokens) stays zero

    mapping = {token: i for i, token in enumerate(tokens)}
    mapping[PAD_TOKEN] = len(tokens)
    mapping[UNK_TOKEN] = len(tokens) + 1
    vocab = Vocabulary(mapping)
    table = EmbeddingTable(vocab, Tensor(matrix, requires_grad=trainable, name="emb.vectors"), trainable)
    return table


def embed_sentence(tokens: list[str], table: EmbeddingTable) -> Tensor:
    """Stack token vectors into a (d, m) matrix, one column per token.

    Unknown tokens map to UNK.  With a trainable table the result is wired
    into the graph and backward scatters gradients into the used rows,
    skipping PAD.
    """
    if not tokens:
        raise ValueError("embed_sentence: empty token list")
    vocab = table.vocab
    indices = np.array([vocab.index(t) for t in tokens])
    values = table.vectors.values[indices].T.copy()  # (d, m)
    if not table.trainable:
        return Tensor(values)

    pad_index = vocab.pad_index
    source = table.vectors

    def bwd(g, emit):
        grad = np.zeros_like(source.values)
        keep = indices != pad_index
        np.add.at(grad, indices[keep], g.T[keep])
        emit(source, grad)

    return _node(values, "embed_sentence", (source,), bwd)
