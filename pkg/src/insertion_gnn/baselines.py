"""Unsupervised coherence-graph insertion and the pairwise-order baseline.

Three coherence graph families over sentence cosine similarities:
  pav - each sentence points to its preceding adjacent sentence;
  ssv - each sentence points to its single most similar other sentence;
  msv - every ordered pair above a similarity threshold theta.
A candidate insertion is scored by the mean edge weight of the graph it
induces, and the best-scoring slot wins.

The pairwise-order baseline trains an MLP on concat(u, v, |u-v|) to
predict "u precedes v", then scores each slot by the log-likelihood of
the implied precedence pattern.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernel
from .data import EmbeddedProblem, N_PARTS, N_SLOTS
from .errors import ConfigError, DomainError
from .optim import AdamState, adam_step
from .rng import Rng
from .tensor import Tensor, add, bce_with_targets, constant, matmul, sigmoid, tanh
from .attention import glorot

ALGORITHMS = ("pav", "ssv", "msv")


@dataclass
class CoherenceGraph:
    n: int
    edges: list[tuple[int, int, float]]  # (from, to, cosine weight)
    algorithm: str
    theta: float | None = None


def cosine_similarity(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine in [-1, 1]; 0 by convention when either vector is all-zero."""
    nu, nv = float(np.linalg.norm(u)), float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0))


def build_coherence_graph(sents: Sequence[np.ndarray], algorithm: str,
                          theta: float | None = None) -> CoherenceGraph:
    if algorithm not in ALGORITHMS:
        raise ConfigError(f"unknown coherence algorithm {algorithm!r}")
    if algorithm == "msv" and theta is None:
        raise ConfigError("msv requires a similarity threshold theta")
    n = len(sents)
    if n < 1:
        raise DomainError("coherence graph needs at least one sentence")
    edges: list[tuple[int, int, float]] = []
    if algorithm == "pav":
        for i in range(1, n):
            edges.append((i, i - 1, cosine_similarity(sents[i], sents[i - 1])))
    elif algorithm == "ssv":
        for i in range(n):
            best_j, best_sim = -1, -np.inf
            for j in range(n):
                if j == i:
                    continue
                sim = cosine_similarity(sents[i], sents[j])
                if sim > best_sim:
                    best_j, best_sim = j, sim
            if best_j >= 0:
                edges.append((i, best_j, best_sim))
    else:
        for i in range(n):
            for j in range(n):
                if j == i:
                    continue
                sim = cosine_similarity(sents[i], sents[j])
                if sim >= theta:
                    edges.append((i, j, sim))
    return CoherenceGraph(n=n, edges=edges, algorithm=algorithm, theta=theta)


def coherence_score(g: CoherenceGraph, mode: str = "mean") -> float:
    """Mean edge weight (default); edgeless graphs score 0."""
    if not g.edges:
        return 0.0
    total = sum(w for _, _, w in g.edges)
    return total if mode == "sum" else total / len(g.edges)


def candidate_sequence(p: EmbeddedProblem, slot: int) -> list[np.ndarray]:
    """Sentence vectors with the question inserted at `slot`; zero-padded
    empty parts are dropped (a zero vector is not a real sentence)."""
    seq = (p.part_embeddings[: slot + 1] + [p.question_embedding]
           + p.part_embeddings[slot + 1 :])
    keep = [v for i, v in enumerate(seq) if np.any(v) or i == slot + 1]
    return keep


def insert_by_coherence(p: EmbeddedProblem, algorithm: str,
                        theta: float | None = None, score_mode: str = "mean") -> int:
    """Score all four candidate insertions and return the best slot (tie -> earliest)."""
    scores = np.array([
        coherence_score(build_coherence_graph(candidate_sequence(p, k), algorithm, theta),
                        score_mode)
        for k in range(N_SLOTS)
    ])
    return int(np.argmax(scores))


@dataclass
class PairwiseOrderModel:
    """MLP on concat(u, v, |u-v|) -> P(u precedes v)."""

    w1: Tensor  # (3d, hidden)
    b1: Tensor  # (1, hidden)
    w2: Tensor  # (hidden, 1)
    b2: Tensor  # (1, 1)
    dim: int

    def parameters(self) -> list[Tensor]:
        return [self.w1, self.b1, self.w2, self.b2]


def init_pairwise_model(dim: int, hidden: int, rng: Rng) -> PairwiseOrderModel:
    return PairwiseOrderModel(
        w1=Tensor(glorot(3 * dim, hidden, rng), requires_grad=True),
        b1=Tensor(np.zeros((1, hidden)), requires_grad=True),
        w2=Tensor(glorot(hidden, 1, rng), requires_grad=True),
        b2=Tensor(np.zeros((1, 1)), requires_grad=True),
        dim=dim,
    )


def pair_features(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    return np.concatenate([u, v, np.abs(u - v)])[None, :]


def pairwise_prob_t(model: PairwiseOrderModel, u: np.ndarray, v: np.ndarray) -> Tensor:
    x = constant(pair_features(u, v))
    hidden = tanh(add(matmul(x, model.w1), model.b1))
    return sigmoid(add(matmul(hidden, model.w2), model.b2))


def pairwise_prob(model: PairwiseOrderModel, u: np.ndarray, v: np.ndarray) -> float:
    return pairwise_prob_t(model, u, v).item()


def order_pairs_from_problems(problems: Sequence[EmbeddedProblem]) -> list[tuple[np.ndarray, np.ndarray, int]]:
    """Precedence-labeled vector pairs from known paragraph orders.

    Non-empty parts carry their paragraph position; the question sits in
    its labeled slot. Each ordered pair is emitted in both directions.
    """
    pairs = []
    for p in problems:
        items = [(v, float(i)) for i, v in enumerate(p.part_embeddings) if np.any(v)]
        items.append((p.question_embedding, p.label + 0.5))
        for a, (u, pu) in enumerate(items):
            for b, (v, pv) in enumerate(items):
                if a == b or pu == pv:
                    continue
                pairs.append((u, v, 1 if pu < pv else 0))
    return pairs


def pairwise_dataset_loss(model: PairwiseOrderModel,
                          pairs: Sequence[tuple[np.ndarray, np.ndarray, int]]) -> float:
    preds = [pairwise_prob(model, u, v) for u, v, _ in pairs]
    return kernel.bce_loss(preds, [y for _, _, y in pairs])


def toposort_train(pairs: Sequence[tuple[np.ndarray, np.ndarray, int]],
                   model: PairwiseOrderModel, epochs: int, lr: float,
                   rng: Rng | None = None, weight_decay: float = 0.0) -> PairwiseOrderModel:
    """BCE training of the pairwise model, one Adam step per pair."""
    if not pairs:
        raise ConfigError("toposort training needs at least one pair")
    rng = rng or Rng(0)
    params = model.parameters()
    states = [AdamState.for_param(t.data, lr=lr, weight_decay=weight_decay) for t in params]
    order = list(range(len(pairs)))
    for _ in range(epochs):
        rng.shuffle(order)
        for i in order:
            u, v, y = pairs[i]
            for t in params:
                t.zero_grad()
            loss = bce_with_targets(pairwise_prob_t(model, u, v), np.array([[float(y)]]))
            loss.backward()
            for t, st in zip(params, states):
                t.data = adam_step(t.data, t.grad, st)
    return model


def toposort_slot_scores(probs: Sequence[float]) -> np.ndarray:
    """Log-likelihood of each slot given P(question precedes part_i) for i=1..5.

    Slot k implies parts 1..k+1 precede the question and parts k+2..5
    follow it (0-based k).
    """
    p = kernel.clamp_probs(np.asarray(list(probs), dtype=np.float64))
    if p.size != N_PARTS:
        raise DomainError(f"expected {N_PARTS} precedence probabilities, got {p.size}")
    log_p, log_1mp = np.log(p), np.log(1.0 - p)
    return np.array([log_1mp[: k + 1].sum() + log_p[k + 1 :].sum() for k in range(N_SLOTS)])


def toposort_infer(p: EmbeddedProblem, model: PairwiseOrderModel) -> int:
    probs = [pairwise_prob(model, p.question_embedding, c) for c in p.part_embeddings]
    return int(np.argmax(toposort_slot_scores(probs)))
