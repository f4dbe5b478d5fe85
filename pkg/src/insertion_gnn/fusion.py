"""Global-local feature fusion, the second attention pass, and the total loss.

Fused features are E = H_L + mean(Z_last), where the mean for a node runs
over every sub-graph containing it. E goes through a second attention
network with its own weights; only the readout MLP is shared with the
global pass. Inference predicts from the fused head alone.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .attention import GgnParams, SharedMlp, net_forward, slot_readout
from .errors import DomainError, ShapeError
from .graph import InsertionGraph, SubGraph
from .local import Fingerprints
from .rng import Rng
from .tensor import Tensor, add, constant, matmul, mul


@dataclass
class LossWeights:
    alpha: float = 0.2
    beta: float = 0.2
    gamma: float = 1.0

    def __post_init__(self):
        if min(self.alpha, self.beta, self.gamma) < 0.0:
            raise DomainError("loss weights must be non-negative")


@dataclass
class FusedState:
    e: Tensor                    # (9, 4) fused features
    membership_counts: list[int]  # sub-graphs containing each node


def fuse(h_l: Tensor, subs: Sequence[SubGraph], fingerprints: Sequence[Fingerprints]) -> FusedState:
    """E_i = H_L_i + mean over sub-graphs containing i of their last fingerprint row."""
    n, width = h_l.data.shape
    z_sum: Tensor | None = None
    counts = np.zeros(n)
    for sub, f in zip(subs, fingerprints):
        if f.last.data.shape[1] != width:
            raise ShapeError(
                f"fingerprint width {f.last.data.shape[1]} != global width {width}")
        scatter = np.zeros((n, len(sub.node_ids)))
        for local, node in enumerate(sub.node_ids):
            scatter[node, local] = 1.0
            counts[node] += 1.0
        term = matmul(constant(scatter), f.last)
        z_sum = term if z_sum is None else add(z_sum, term)
    inv = np.where(counts > 0, 1.0 / np.where(counts > 0, counts, 1.0), 0.0)
    e = add(h_l, mul(z_sum, inv[:, None]))
    return FusedState(e=e, membership_counts=[int(c) for c in counts])


def fused_forward(e: Tensor, fused_net: GgnParams, mlp: SharedMlp, g: InsertionGraph,
                  rng: Rng | None = None, training: bool = False) -> Tensor:
    """Second attention pass over E, read out with the SAME SharedMlp object."""
    h = net_forward(e, fused_net.layers, g.attention_mask(), rng, training)
    return slot_readout(h, mlp, g.slot_nodes)


def total_loss(l_global: float, l_local: float, l_fused: float, w: LossWeights) -> float:
    """Weighted sum of the three binary cross-entropy losses."""
    return w.alpha * l_global + w.beta * l_local + w.gamma * l_fused


def predict_slot(probs) -> int:
    """argmax slot; ties break toward the earliest slot."""
    p = np.asarray(probs, dtype=np.float64).ravel()
    if p.size != 4 or not np.all(np.isfinite(p)):
        raise DomainError("predict_slot expects 4 finite probabilities")
    return int(np.argmax(p))
