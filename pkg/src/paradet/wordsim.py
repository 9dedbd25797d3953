"""Pair-wise word similarity features.

The similarity matrix holds the dot product of every word-vector pair across
the two sentences.  Two convolution passes read it: one scans the columns
(first sentence's rows act as input channels), the other scans the rows of
the transpose with its own filter set.  ReLU plus a global max-pool reduce
each pass to a fixed-size vector; their concatenation is the matching
feature vector.

Fixed filter shapes require a fixed channel depth while sentences vary in
length, so the matrix is zero-padded up to ``sim_channels`` rows per
direction (exactly what PAD tokens would contribute) and rows beyond that
depth are dropped: tokens past position ``sim_channels`` contribute no
matching evidence.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .encoder import glorot
from .errors import ShapeError


@dataclass
class WordSimConfig:
    sim_filters: int = 32
    sim_filter_width: int = 3
    sim_channels: int = 64
    use_cosine: bool = False

    def validate(self) -> None:
        if self.sim_filters < 1 or self.sim_filter_width < 1 or self.sim_channels < 1:
            raise ValueError("wordsim: filter count, width, and channel depth must be positive")

    @property
    def output_size(self) -> int:
        return 2 * self.sim_filters


@dataclass
class WordSimParams:
    """Separate filter sets for the two scan directions."""

    conv_lr: tuple[Tensor, Tensor]
    conv_tb: tuple[Tensor, Tensor]

    @classmethod
    def init(cls, config: WordSimConfig, rng: np.random.Generator) -> "WordSimParams":
        config.validate()
        k, c, p = config.sim_filters, config.sim_channels, config.sim_filter_width
        shape = (k, c, p)

        def filters(name):
            return Tensor(glorot(rng, shape, fan_in=c * p, fan_out=k * p), requires_grad=True, name=name)

        def bias(name):
            return Tensor(np.zeros(k), requires_grad=True, name=name)

        return cls(
            conv_lr=(filters("wsim.conv_lr.w"), bias("wsim.conv_lr.b")),
            conv_tb=(filters("wsim.conv_tb.w"), bias("wsim.conv_tb.b")),
        )

    def named(self) -> dict[str, Tensor]:
        return {
            "wsim.conv_lr.w": self.conv_lr[0],
            "wsim.conv_lr.b": self.conv_lr[1],
            "wsim.conv_tb.w": self.conv_tb[0],
            "wsim.conv_tb.b": self.conv_tb[1],
        }


def similarity_matrix(e1: Tensor, e2: Tensor, use_cosine: bool = False) -> Tensor:
    """(d,m) x (d,n) -> (m,n) matrix of word-pair dot products.

    With ``use_cosine`` the columns are unit-normalized first, turning each
    entry into a cosine; all-zero columns (PAD) stay exactly zero either way.
    """
    if e1.ndim != 2 or e2.ndim != 2 or e1.shape[0] != e2.shape[0]:
        raise ShapeError(f"similarity_matrix: incompatible shapes {e1.shape} and {e2.shape}")
    if use_cosine:
        e1 = ad.normalize_columns(e1)
        e2 = ad.normalize_columns(e2)
    return ad.pairwise_dot(e1, e2)


def _fit_channels(sim: Tensor, depth: int) -> Tensor:
    rows = sim.shape[0]
    if rows == depth:
        return sim
    if rows < depth:
        return ad.pad_rows(sim, depth)
    # Tokens beyond the configured depth carry no matching evidence.
    values = sim.values[:depth]
    src = sim

    def bwd(g, emit):
        full = np.zeros_like(src.values)
        full[:depth] = g
        emit(src, full)

    return ad._node(values, "truncate_rows", (src,), bwd)


def match_features(sim: Tensor, config: WordSimConfig, params: WordSimParams) -> Tensor:
    """Reduce an (m,n) similarity matrix to a (2 * sim_filters,) vector.

    Direction one convolves along the second sentence with the first
    sentence's rows as channels; direction two does the same on the
    transpose with its own filters.  Each direction applies ReLU and a
    global max-pool; the two halves are concatenated in that order.
    """
    if sim.ndim != 2:
        raise ShapeError(f"match_features: similarity matrix must be 2-D, got {sim.shape}")
    m, n = sim.shape
    p = config.sim_filter_width
    if n < p or m < p:
        raise ShapeError(
            f"match_features: similarity matrix {sim.shape} smaller than filter width {p}; "
            f"the padding policy should prevent this"
        )
    w_lr, b_lr = params.conv_lr
    w_tb, b_tb = params.conv_tb
    depth = w_lr.shape[1]

    first = ad.global_max_pool(ad.relu(ad.conv1d(_fit_channels(sim, depth), w_lr, b_lr)))
    flipped = ad.transpose(sim)
    second = ad.global_max_pool(ad.relu(ad.conv1d(_fit_channels(flipped, depth), w_tb, b_tb)))
    return ad.concat([first, second], axis=0)
