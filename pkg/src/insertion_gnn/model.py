"""All trainable weights and the end-to-end forward pass.

The pipeline per problem: global attention over the 9-node graph, the
shared-weight local GCN over the four slot sub-graphs, feature fusion,
a second attention pass, and three BCE losses combined by the loss
weights. The readout MLP is one object used by both the global and the
fused head.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .attention import (
    GgnParams,
    SharedMlp,
    ggn_forward,
    init_gat_layer,
    init_shared_mlp,
    slot_readout,
)
from .config import RunConfig
from .errors import ShapeError
from .fusion import fuse, fused_forward, predict_slot
from .graph import InsertionGraph, build_local_subgraphs
from .kernel import one_hot
from .local import (
    GcnLayerParams,
    LocalHead,
    classify_subgraph,
    init_gcn_layers,
    init_local_head,
    wl_fingerprints,
)
from .rng import Rng
from .tensor import Tensor, add, bce_with_targets, concat_rows, mul


@dataclass
class ModelParams:
    global_net: GgnParams
    fusion_net: GgnParams
    local_layers: list[GcnLayerParams]
    local_head: LocalHead
    mlp: SharedMlp
    dim: int


def init_model_params(dim: int, cfg: RunConfig, rng: Rng) -> ModelParams:
    w = cfg.head_width
    # feature dropout sits between layers, so the first layer of each net
    # sees undropped input
    global_net = GgnParams(layers=[
        init_gat_layer(dim, cfg.heads_hidden, w, rng, head_merge="concat",
                       activation="leaky_relu", leaky_slope=cfg.leaky_slope,
                       attn_dropout=cfg.attn_dropout, feat_dropout=0.0),
        init_gat_layer(cfg.heads_hidden * w, cfg.heads_out, w, rng, head_merge="average",
                       activation="identity", leaky_slope=cfg.leaky_slope,
                       attn_dropout=cfg.attn_dropout, feat_dropout=cfg.dropout),
    ])
    fusion_net = GgnParams(layers=[
        init_gat_layer(w, cfg.fusion_heads_hidden, w, rng, head_merge="concat",
                       activation="leaky_relu", leaky_slope=cfg.leaky_slope,
                       attn_dropout=cfg.attn_dropout, feat_dropout=0.0),
        init_gat_layer(cfg.fusion_heads_hidden * w, cfg.fusion_heads_out, w, rng,
                       head_merge="average", activation="identity",
                       leaky_slope=cfg.leaky_slope, attn_dropout=cfg.attn_dropout,
                       feat_dropout=cfg.dropout),
    ])
    local_layers = init_gcn_layers([w] * (cfg.gcn_layers + 1), rng)
    pooled_len = cfg.gcn_layers * w // 4
    local_head = init_local_head(pooled_len, rng)
    mlp = init_shared_mlp(w, rng)
    return ModelParams(global_net=global_net, fusion_net=fusion_net,
                       local_layers=local_layers, local_head=local_head,
                       mlp=mlp, dim=dim)


def named_parameters(params: ModelParams) -> list[tuple[str, Tensor]]:
    out: list[tuple[str, Tensor]] = []
    for net_name, net in (("global", params.global_net), ("fusion", params.fusion_net)):
        for li, layer in enumerate(net.layers):
            out.append((f"{net_name}.l{li}.w", layer.w))
            out.append((f"{net_name}.l{li}.attn", layer.attn))
            if layer.residual is not None:
                out.append((f"{net_name}.l{li}.residual", layer.residual))
    for li, layer in enumerate(params.local_layers):
        out.append((f"local.l{li}.w", layer.w))
    out.append(("local.head.w", params.local_head.w))
    out.append(("local.head.b", params.local_head.b))
    out.append(("mlp.w1", params.mlp.w1))
    out.append(("mlp.b1", params.mlp.b1))
    out.append(("mlp.w2", params.mlp.w2))
    out.append(("mlp.b2", params.mlp.b2))
    return out


def zero_grads(params: ModelParams) -> None:
    for _, t in named_parameters(params):
        t.zero_grad()


@dataclass
class ForwardResult:
    loss: Tensor            # scalar total loss, backpropagatable
    probs_global: np.ndarray
    probs_local: np.ndarray
    probs_fused: np.ndarray

    def prediction(self, ensemble: bool = False) -> int:
        p = 0.5 * (self.probs_fused + self.probs_global) if ensemble else self.probs_fused
        return predict_slot(p)


def forward_problem(params: ModelParams, g: InsertionGraph, label: int,
                    cfg: RunConfig, rng: Rng | None = None,
                    training: bool = False) -> ForwardResult:
    if g.features.shape[1] != params.dim:
        raise ShapeError(f"graph dim {g.features.shape[1]} != model dim {params.dim}")
    target = one_hot(label)
    h_l = ggn_forward(g, params.global_net, rng, training)
    probs_global = slot_readout(h_l, params.mlp, g.slot_nodes)

    subs = build_local_subgraphs(g, h_l)
    prints = [wl_fingerprints(s, params.local_layers, rng, training,
                              interlayer_dropout=cfg.dropout) for s in subs]
    probs_local = concat_rows([classify_subgraph(f, params.local_head) for f in prints])

    fused = fuse(h_l, subs, prints)
    probs_fused = fused_forward(fused.e, params.fusion_net, params.mlp, g, rng, training)

    w = cfg.loss_weights
    loss = add(
        add(mul(bce_with_targets(probs_global, target), w.alpha),
            mul(bce_with_targets(probs_local, target), w.beta)),
        mul(bce_with_targets(probs_fused, target), w.gamma),
    )
    return ForwardResult(loss=loss,
                         probs_global=probs_global.data.ravel().copy(),
                         probs_local=probs_local.data.ravel().copy(),
                         probs_fused=probs_fused.data.ravel().copy())


def save_model(path, params: ModelParams, cfg: RunConfig) -> None:
    meta = {"dim": params.dim, "head_width": cfg.head_width,
            "heads_hidden": cfg.heads_hidden, "heads_out": cfg.heads_out,
            "fusion_heads_hidden": cfg.fusion_heads_hidden,
            "fusion_heads_out": cfg.fusion_heads_out, "gcn_layers": cfg.gcn_layers,
            "leaky_slope": cfg.leaky_slope, "dropout": cfg.dropout,
            "attn_dropout": cfg.attn_dropout}
    arrays = {name.replace(".", "__"): t.data for name, t in named_parameters(params)}
    np.savez(path, __meta__=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8),
             **arrays)


def load_model(path) -> tuple[ModelParams, RunConfig]:
    with np.load(path) as z:
        meta = json.loads(bytes(z["__meta__"]).decode())
        stored = {k: z[k] for k in z.files if k != "__meta__"}
    cfg = RunConfig(head_width=meta["head_width"], heads_hidden=meta["heads_hidden"],
                    heads_out=meta["heads_out"],
                    fusion_heads_hidden=meta["fusion_heads_hidden"],
                    fusion_heads_out=meta["fusion_heads_out"],
                    gcn_layers=meta["gcn_layers"], leaky_slope=meta["leaky_slope"],
                    dropout=meta["dropout"], attn_dropout=meta["attn_dropout"])
    params = init_model_params(meta["dim"], cfg, Rng(0))
    for name, t in named_parameters(params):
        key = name.replace(".", "__")
        if key not in stored:
            raise ShapeError(f"missing parameter {name} in {path}")
        if stored[key].shape != t.data.shape:
            raise ShapeError(f"parameter {name} shape {stored[key].shape} != {t.data.shape}")
        t.data = stored[key].astype(np.float64)
    return params, cfg
