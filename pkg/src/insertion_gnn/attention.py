"""Multi-head graph attention over the insertion graph, and the shared readout MLP.

Attention follows e_ij = leaky_relu(a . [W h_i || W h_j]) with softmax over
the neighborhood of i. Hidden layers concatenate heads and apply
leaky_relu; the output layer averages heads and stays linear (the readout
MLP applies tanh). Residual connections use a learned projection when the
widths differ, identity otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernel
from .graph import InsertionGraph, SLOT_NODES
from .rng import Rng
from .tensor import (
    Tensor,
    add,
    concat_cols,
    constant,
    dropout,
    gather_rows,
    leaky_relu,
    masked_row_softmax,
    matmul,
    mul,
    reshape,
    row_normalize,
    sigmoid,
    slice_cols,
    slice_rows,
    tanh,
    transpose,
)


@dataclass
class GatLayerParams:
    """One attention layer; per-head weights live in column blocks of `w`."""

    heads: int
    width: int
    w: Tensor              # (d_in, heads*width)
    attn: Tensor           # (2*width, heads); column h is head h's attention vector
    residual: Tensor | None  # (d_in, out_width) projection, None for identity
    leaky_slope: float = 0.2
    attn_dropout: float = 0.6
    feat_dropout: float = 0.5
    head_merge: str = "concat"      # concat (hidden) | average (output)
    activation: str = "leaky_relu"  # leaky_relu (hidden) | identity (output)
    attn_dropout_style: str = "renormalize"  # renormalize | inverted

    @property
    def out_width(self) -> int:
        return self.heads * self.width if self.head_merge == "concat" else self.width

    @property
    def in_width(self) -> int:
        return self.w.data.shape[0]


@dataclass
class GgnParams:
    layers: list[GatLayerParams]


@dataclass
class SharedMlp:
    """tanh MLP over one slot representation; shared with the fusion stage."""

    w1: Tensor  # (4, 4)
    b1: Tensor  # (1, 4)
    w2: Tensor  # (4, 1)
    b2: Tensor  # (1, 1)


def glorot(rows: int, cols: int, rng: Rng) -> np.ndarray:
    limit = np.sqrt(6.0 / (rows + cols))
    return rng.uniform_range(rows, cols, -limit, limit)


def init_gat_layer(d_in: int, heads: int, width: int, rng: Rng, *,
                   head_merge: str = "concat", activation: str = "leaky_relu",
                   leaky_slope: float = 0.2, attn_dropout: float = 0.6,
                   feat_dropout: float = 0.5) -> GatLayerParams:
    """Glorot-uniform init per head block; residual projection when widths differ."""
    w = np.concatenate([glorot(d_in, width, rng) for _ in range(heads)], axis=1)
    attn = np.concatenate([glorot(2 * width, 1, rng) for _ in range(heads)], axis=1)
    out_width = heads * width if head_merge == "concat" else width
    residual = Tensor(glorot(d_in, out_width, rng), requires_grad=True) if d_in != out_width else None
    return GatLayerParams(heads=heads, width=width,
                          w=Tensor(w, requires_grad=True),
                          attn=Tensor(attn, requires_grad=True),
                          residual=residual, leaky_slope=leaky_slope,
                          attn_dropout=attn_dropout, feat_dropout=feat_dropout,
                          head_merge=head_merge, activation=activation)


def init_shared_mlp(width: int, rng: Rng) -> SharedMlp:
    return SharedMlp(
        w1=Tensor(glorot(width, width, rng), requires_grad=True),
        b1=Tensor(np.zeros((1, width)), requires_grad=True),
        w2=Tensor(glorot(width, 1, rng), requires_grad=True),
        b2=Tensor(np.zeros((1, 1)), requires_grad=True),
    )


def _head_projection(h: Tensor, layer: GatLayerParams, head: int) -> Tensor:
    return matmul(h, slice_cols(layer.w, head * layer.width, (head + 1) * layer.width))


# constants reused across steps, keyed by shape
_SEG_SUM: dict[tuple[int, int], np.ndarray] = {}
_ROW_EXPAND: dict[tuple[int, int], np.ndarray] = {}


def _seg_sum(heads: int, width: int) -> np.ndarray:
    """(heads*width, heads) 0/1 matrix summing each head's column block."""
    key = (heads, width)
    if key not in _SEG_SUM:
        _SEG_SUM[key] = np.kron(np.eye(heads), np.ones((width, 1)))
    return _SEG_SUM[key]


def _row_expand(heads: int, n: int) -> np.ndarray:
    """(heads*n, heads) 0/1 matrix repeating each head's row n times."""
    key = (heads, n)
    if key not in _ROW_EXPAND:
        _ROW_EXPAND[key] = np.kron(np.eye(heads), np.ones((n, 1)))
    return _ROW_EXPAND[key]


def _apply_attn_dropout(alpha: Tensor, layer: GatLayerParams,
                        rng: Rng | None, training: bool) -> Tensor:
    """Drop attention entries during training. The default renormalizes each
    row so surviving weights still sum to 1; the inverted style rescales
    survivors by 1/keep instead."""
    if not training or layer.attn_dropout <= 0.0:
        return alpha
    keep = rng.keep_mask(*alpha.data.shape, drop_rate=layer.attn_dropout)
    if layer.attn_dropout_style == "inverted":
        return mul(alpha, keep / (1.0 - layer.attn_dropout))
    return row_normalize(mul(alpha, keep))


def _stacked_attention(h: Tensor, layer: GatLayerParams, mask: np.ndarray,
                       rng: Rng | None, training: bool) -> tuple[Tensor, Tensor]:
    """All heads at once: (alpha stacked head-major as (heads*n, n), Wh (n, heads*width)).

    Produces bit-identical weights to the per-head path; it only batches
    the score computation.
    """
    n = h.data.shape[0]
    heads, width = layer.heads, layer.width
    wh = matmul(h, layer.w)
    seg = _seg_sum(heads, width)
    # per-head source/destination scores, columns are heads
    a_src = reshape(transpose(slice_rows(layer.attn, 0, width)), 1, heads * width)
    a_dst = reshape(transpose(slice_rows(layer.attn, width, 2 * width)), 1, heads * width)
    s_src = matmul(mul(wh, a_src), constant(seg))  # (n, heads)
    s_dst = matmul(mul(wh, a_dst), constant(seg))
    # e[(head, i), j] = s_src[i, head] + s_dst[j, head]
    src_col = reshape(transpose(s_src), heads * n, 1)
    dst_rows = matmul(constant(_row_expand(heads, n)), transpose(s_dst))
    e = leaky_relu(add(src_col, dst_rows), layer.leaky_slope)
    alpha = masked_row_softmax(e, np.tile(mask, (heads, 1)))
    alpha = _apply_attn_dropout(alpha, layer, rng, training)
    return alpha, wh


def _head_scores(wh: Tensor, layer: GatLayerParams, head: int) -> Tensor:
    """e_ij = leaky_relu(a_src . Wh_i + a_dst . Wh_j) as a dense (n, n) matrix."""
    a = slice_cols(layer.attn, head, head + 1)
    s_src = matmul(wh, slice_rows(a, 0, layer.width))
    s_dst = matmul(wh, slice_rows(a, layer.width, 2 * layer.width))
    return leaky_relu(add(s_src, transpose(s_dst)), layer.leaky_slope)


def _head_attention(h: Tensor, layer: GatLayerParams, mask: np.ndarray, head: int,
                    rng: Rng | None, training: bool) -> tuple[Tensor, Tensor]:
    """(alpha, Wh) for one head. During training, attention entries are
    dropped at layer.attn_dropout and each row is renormalized (a fully
    dropped row aggregates nothing that step)."""
    wh = _head_projection(h, layer, head)
    alpha = masked_row_softmax(_head_scores(wh, layer, head), mask)
    alpha = _apply_attn_dropout(alpha, layer, rng, training)
    return alpha, wh


def attention_weights(h: Tensor, layer: GatLayerParams, mask: np.ndarray, head: int,
                      rng: Rng | None = None, training: bool = False) -> Tensor:
    """Normalized attention matrix for one head; rows sum to 1 over N_i."""
    alpha, _ = _head_attention(h, layer, mask, head, rng, training)
    return alpha


def gat_layer(h: Tensor, layer: GatLayerParams, mask: np.ndarray,
              rng: Rng | None = None, training: bool = False) -> Tensor:
    """One attention layer: feature dropout, per-head aggregation, merge,
    activation, then the residual path."""
    if training and layer.feat_dropout > 0.0:
        h = dropout(h, layer.feat_dropout, rng, training)
    n = h.data.shape[0]
    alpha_all, wh_all = _stacked_attention(h, layer, mask, rng, training)
    head_outs = []
    for head in range(layer.heads):
        alpha = slice_rows(alpha_all, head * n, (head + 1) * n)
        wh = slice_cols(wh_all, head * layer.width, (head + 1) * layer.width)
        head_outs.append(matmul(alpha, wh))
    if layer.head_merge == "concat":
        merged = concat_cols(head_outs)
    else:
        acc = head_outs[0]
        for extra in head_outs[1:]:
            acc = add(acc, extra)
        merged = mul(acc, 1.0 / layer.heads)
    out = leaky_relu(merged, layer.leaky_slope) if layer.activation == "leaky_relu" else merged
    res = matmul(h, layer.residual) if layer.residual is not None else h
    return add(out, res)


def net_forward(h: Tensor, layers: list[GatLayerParams], mask: np.ndarray,
                rng: Rng | None = None, training: bool = False) -> Tensor:
    for layer in layers:
        h = gat_layer(h, layer, mask, rng, training)
    return h


def ggn_forward(g: InsertionGraph, params: GgnParams, rng: Rng | None = None,
                training: bool = False) -> Tensor:
    """Full attention pass over the insertion graph; input is g.features (H^0)."""
    return net_forward(constant(g.features), params.layers, g.attention_mask(),
                       rng, training)


def slot_readout(h: Tensor, mlp: SharedMlp, slot_nodes=SLOT_NODES) -> Tensor:
    """Per-slot probability: sigmoid(w2 . tanh(w1 . h_slot + b1) + b2), as (4, 1)."""
    s = gather_rows(h, slot_nodes)
    hidden = tanh(add(matmul(s, mlp.w1), mlp.b1))
    return sigmoid(add(matmul(hidden, mlp.w2), mlp.b2))


def ggn_loss(probs, label: int) -> float:
    """Mean BCE of the four slot probabilities against the one-hot label."""
    p = np.asarray(probs, dtype=np.float64).ravel()
    return kernel.bce_loss(p, kernel.one_hot(label, p.size).ravel())
