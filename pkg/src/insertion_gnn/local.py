"""Parameter-shared GCN over the slot sub-graphs, with per-layer fingerprints.

Each sub-graph runs the same weight matrices (sharing is structural: the
four forwards hold the same Tensor objects). The per-layer outputs are
kept as multi-scale fingerprints and column-concatenated; classification
zero-pads the 3 node rows to 4, average-pools 4x4 blocks, and applies a
sigmoid linear head shared across the four slots.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernel
from .errors import ShapeError
from .graph import SubGraph
from .rng import Rng
from .tensor import (
    Tensor,
    add,
    block_mean_pool,
    concat_cols,
    constant,
    dropout,
    matmul,
    pad_rows,
    relu,
    sigmoid,
)
from .attention import glorot

POOL = 4  # pooling block size; sub-graph rows are zero-padded 3 -> 4


@dataclass
class GcnLayerParams:
    w: Tensor  # (w_in, w_out); activation is relu


@dataclass
class Fingerprints:
    """Per-layer outputs Z^1..Z^M of one sub-graph and their column concat."""

    slot_index: int
    per_layer: list[Tensor]
    concat: Tensor

    @property
    def last(self) -> Tensor:
        return self.per_layer[-1]


@dataclass
class LocalHead:
    """Pool-then-linear binary classifier shared by all four sub-graphs."""

    w: Tensor  # (pooled_len, 1)
    b: Tensor  # (1, 1)


def init_gcn_layers(widths: list[int], rng: Rng) -> list[GcnLayerParams]:
    """Weight chain d0->d1->...; one shared stack for all sub-graphs."""
    return [GcnLayerParams(w=Tensor(glorot(a, b, rng), requires_grad=True))
            for a, b in zip(widths, widths[1:])]


def init_local_head(pooled_len: int, rng: Rng) -> LocalHead:
    return LocalHead(w=Tensor(glorot(pooled_len, 1, rng), requires_grad=True),
                     b=Tensor(np.zeros((1, 1)), requires_grad=True))


def normalized_adjacency(n: int, edges) -> np.ndarray:
    """D^-1/2 (A_sym + I) D^-1/2 for the given directed edge list."""
    a = np.eye(n)
    for i, j in edges:
        a[i, j] = 1.0
        a[j, i] = 1.0
    d_inv_sqrt = 1.0 / np.sqrt(a.sum(axis=1))
    return a * d_inv_sqrt[:, None] * d_inv_sqrt[None, :]


_SUBGRAPH_ADJ = normalized_adjacency(3, ((0, 1), (1, 2)))


def gcn_layer(features: Tensor, layer: GcnLayerParams, adj: np.ndarray) -> Tensor:
    """relu(normalized_adjacency . H . W)."""
    if features.data.shape[0] != adj.shape[0]:
        raise ShapeError(f"features rows {features.data.shape[0]} != adjacency {adj.shape[0]}")
    return relu(matmul(matmul(constant(adj), features), layer.w))


def wl_fingerprints(sub: SubGraph, layers: list[GcnLayerParams],
                    rng: Rng | None = None, training: bool = False,
                    interlayer_dropout: float = 0.5) -> Fingerprints:
    """Run the shared layer stack and keep every layer's output.

    Dropout sits between consecutive layers during training, never after
    the last one, so inference is deterministic.
    """
    adj = normalized_adjacency(3, sub.edges) if sub.edges != ((0, 1), (1, 2)) else _SUBGRAPH_ADJ
    h = sub.features
    outs: list[Tensor] = []
    for li, layer in enumerate(layers):
        if li > 0 and training and interlayer_dropout > 0.0:
            h = dropout(h, interlayer_dropout, rng, training)
        h = gcn_layer(h, layer, adj)
        outs.append(h)
    return Fingerprints(slot_index=sub.slot_index, per_layer=outs,
                        concat=concat_cols(outs))


def classify_subgraph(f: Fingerprints, head: LocalHead) -> Tensor:
    """Zero-pad rows to the pool size, 4x4 average-pool, then sigmoid linear."""
    pooled = block_mean_pool(pad_rows(f.concat, POOL), POOL, POOL)
    return sigmoid(add(matmul(pooled, head.w), head.b))


def lgn_loss(probs, label: int) -> float:
    """Mean BCE of the four sub-graph probabilities against the one-hot label."""
    p = np.asarray(probs, dtype=np.float64).ravel()
    return kernel.bce_loss(p, kernel.one_hot(label, p.size).ravel())
