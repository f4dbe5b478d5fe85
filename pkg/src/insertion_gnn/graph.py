"""The 9-node insertion graph and the four 3-node slot sub-graphs.

Node order is [c1..c5, A..D]: five context parts then four slot nodes.
The 12 directed edges encode every candidate reading order: each slot
path c_i -> S_i -> c_{i+1} plus the skip path c_i -> c_{i+1}. Message
passing treats edges as symmetric and adds self-loops.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .data import EmbeddedProblem, N_PARTS, N_SLOTS
from .errors import DomainError, ShapeError
from .tensor import Tensor, constant, gather_rows

NODE_COUNT = 9
NODE_ROLES = ("c1", "c2", "c3", "c4", "c5", "A", "B", "C", "D")
CONTEXT_NODES = (0, 1, 2, 3, 4)
SLOT_NODES = (5, 6, 7, 8)


def insertion_edges(context_nodes: Sequence[int] = CONTEXT_NODES,
                    slot_nodes: Sequence[int] = SLOT_NODES) -> tuple[tuple[int, int], ...]:
    """The fixed 12-edge rule: c_i->S_i, S_i->c_{i+1}, c_i->c_{i+1} for i=1..4."""
    edges = []
    for i in range(N_SLOTS):
        edges.append((context_nodes[i], slot_nodes[i]))
        edges.append((slot_nodes[i], context_nodes[i + 1]))
        edges.append((context_nodes[i], context_nodes[i + 1]))
    return tuple(edges)


@dataclass
class InsertionGraph:
    """Fixed-topology graph over one embedded problem; features is H^0 (9 x d)."""

    features: np.ndarray
    edges: tuple[tuple[int, int], ...] = field(default_factory=insertion_edges)
    context_nodes: tuple[int, ...] = CONTEXT_NODES
    slot_nodes: tuple[int, ...] = SLOT_NODES
    node_roles: tuple[str, ...] = NODE_ROLES

    @property
    def node_count(self) -> int:
        return self.features.shape[0]

    def attention_mask(self) -> np.ndarray:
        """Boolean (n, n) mask: mask[i, j] iff j is in N_i (symmetrized + self)."""
        cached = getattr(self, "_mask", None)
        if cached is not None:
            return cached
        n = self.node_count
        mask = np.eye(n, dtype=bool)
        for a, b in self.edges:
            mask[a, b] = True
            mask[b, a] = True
        self._mask = mask
        return mask


@dataclass
class SubGraph:
    """One slot with its two surrounding context parts, in paragraph order."""

    slot_index: int
    node_ids: tuple[int, int, int]  # (left context, slot, right context), global ids
    features: Tensor
    edges: tuple[tuple[int, int], ...] = ((0, 1), (1, 2))  # local indices


def build_insertion_graph(p: EmbeddedProblem) -> InsertionGraph:
    """H^0 rows 1..5 are the part embeddings; all four slot rows are S_q."""
    d = p.question_embedding.shape[0]
    for i, v in enumerate(p.part_embeddings):
        if v.shape != (d,):
            raise ShapeError(f"part {i + 1} has dim {v.shape}, question has dim ({d},)")
    if len(p.part_embeddings) != N_PARTS:
        raise ShapeError(f"expected {N_PARTS} part embeddings, got {len(p.part_embeddings)}")
    features = np.zeros((NODE_COUNT, d))
    for i, v in enumerate(p.part_embeddings):
        features[i] = v
    for s in SLOT_NODES:
        features[s] = p.question_embedding
    return InsertionGraph(features=features)


def neighborhood(g: InsertionGraph, i: int) -> set[int]:
    """N_i: in- and out-neighbors of i plus i itself."""
    if not 0 <= i < g.node_count:
        raise DomainError(f"node {i} outside 0..{g.node_count - 1}")
    ns = {i}
    for a, b in g.edges:
        if a == i:
            ns.add(b)
        if b == i:
            ns.add(a)
    return ns


def build_local_subgraphs(g: InsertionGraph, node_features) -> list[SubGraph]:
    """Sub-graph k covers {c_(k+1), slot_k, c_(k+2)}; features copied from node_features."""
    feats = node_features if isinstance(node_features, Tensor) else constant(node_features)
    if feats.data.shape[0] != g.node_count:
        raise ShapeError(f"node_features has {feats.data.shape[0]} rows, graph has {g.node_count}")
    subs = []
    for k in range(N_SLOTS):
        ids = (g.context_nodes[k], g.slot_nodes[k], g.context_nodes[k + 1])
        subs.append(SubGraph(slot_index=k, node_ids=ids,
                             features=gather_rows(feats, ids)))
    return subs


def membership_counts(subs: Sequence[SubGraph], node_count: int = NODE_COUNT) -> list[int]:
    """How many sub-graphs contain each node, in graph node order."""
    counts = [0] * node_count
    for s in subs:
        for nid in s.node_ids:
            counts[nid] += 1
    return counts
