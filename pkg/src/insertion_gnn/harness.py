"""Training loop, evaluation, and the cross-domain protocol.

Training is per-problem (batch size 1): seeded shuffle each epoch, one
forward/backward/Adam step per problem, train loss and validation
accuracy recorded per epoch. Evaluation runs in inference mode and never
touches parameters.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .config import RunConfig
from .data import EmbeddedProblem, N_SLOTS
from .errors import ConfigError, DataError
from .graph import InsertionGraph, build_insertion_graph
from .model import (
    ModelParams,
    forward_problem,
    init_model_params,
    named_parameters,
    zero_grads,
)
from .optim import AdamState, adam_step
from .rng import Rng

log = logging.getLogger(__name__)


@dataclass
class Metrics:
    accuracy: float = 0.0
    per_label_accuracy: list[float] = field(default_factory=lambda: [0.0] * N_SLOTS)
    loss_curve: list[float] = field(default_factory=list)
    val_accuracy_curve: list[float] = field(default_factory=list)

    def lines(self, prefix: str = "") -> list[str]:
        out = [f"{prefix}accuracy={self.accuracy:.6f}"]
        for i, a in enumerate(self.per_label_accuracy):
            out.append(f"{prefix}per_label_accuracy_{'ABCD'[i]}={a:.6f}")
        if self.loss_curve:
            out.append(f"{prefix}final_train_loss={self.loss_curve[-1]:.6f}")
        return out


def evaluate_predictions(problems: Sequence[EmbeddedProblem],
                         predict: Callable[[EmbeddedProblem], int]) -> Metrics:
    """Accuracy of an arbitrary slot predictor; shared by model and baselines."""
    correct = np.zeros(N_SLOTS)
    totals = np.zeros(N_SLOTS)
    for p in problems:
        totals[p.label] += 1
        if predict(p) == p.label:
            correct[p.label] += 1
    per_label = [float(correct[i] / totals[i]) if totals[i] else 0.0 for i in range(N_SLOTS)]
    accuracy = float(correct.sum() / totals.sum()) if totals.sum() else 0.0
    return Metrics(accuracy=accuracy, per_label_accuracy=per_label)


def _check_embedded(problems: Sequence[EmbeddedProblem]) -> None:
    for p in problems:
        if p.question_embedding is None or any(v is None for v in p.part_embeddings):
            raise DataError(f"problem {p.id!r} is missing embeddings")


def evaluate(problems: Sequence[EmbeddedProblem], params: ModelParams,
             cfg: RunConfig | None = None) -> Metrics:
    """Inference-mode accuracy; deterministic and side-effect free."""
    cfg = cfg or RunConfig()
    _check_embedded(problems)

    def predict(p: EmbeddedProblem) -> int:
        g = build_insertion_graph(p)
        result = forward_problem(params, g, p.label, cfg, rng=None, training=False)
        return result.prediction(ensemble=cfg.ensemble_heads)

    return evaluate_predictions(problems, predict)


def train(train_set: Sequence[EmbeddedProblem], val_set: Sequence[EmbeddedProblem],
          cfg: RunConfig) -> tuple[ModelParams, Metrics]:
    """Train for cfg.epochs and return final-epoch parameters plus metrics."""
    if not train_set:
        raise ConfigError("empty training set")
    _check_embedded(train_set)
    _check_embedded(val_set)
    dim = train_set[0].dim
    rng = Rng(cfg.seed)
    params = init_model_params(dim, cfg, rng)
    adam = [AdamState.for_param(t.data, lr=cfg.lr, weight_decay=cfg.weight_decay)
            for _, t in named_parameters(params)]
    graphs: list[InsertionGraph] = [build_insertion_graph(p) for p in train_set]

    metrics = Metrics()
    order = list(range(len(train_set)))
    warned_non_decreasing = False
    for epoch in range(cfg.epochs):
        rng.shuffle(order)
        epoch_loss = 0.0
        for i in order:
            zero_grads(params)
            result = forward_problem(params, graphs[i], train_set[i].label, cfg,
                                     rng=rng, training=True)
            result.loss.backward()
            for (_, t), st in zip(named_parameters(params), adam):
                t.data = adam_step(t.data, t.grad, st)
            epoch_loss += result.loss.item()
        metrics.loss_curve.append(epoch_loss / len(train_set))
        if val_set:
            metrics.val_accuracy_curve.append(evaluate(val_set, params, cfg).accuracy)
        if epoch > 10 and metrics.loss_curve[-1] > metrics.loss_curve[-2] \
                and not warned_non_decreasing:
            warned_non_decreasing = True
            log.warning("training loss increased at epoch %d", epoch)

    if val_set:
        final = evaluate(val_set, params, cfg)
        metrics.accuracy = final.accuracy
        metrics.per_label_accuracy = final.per_label_accuracy
    return params, metrics


def cross_domain(source_train: Sequence[EmbeddedProblem],
                 source_val: Sequence[EmbeddedProblem],
                 target_set: Sequence[EmbeddedProblem],
                 cfg: RunConfig) -> tuple[Metrics, Metrics]:
    """Train on the source domain, then test on the target without fine-tuning."""
    dims = {p.dim for p in list(source_train) + list(source_val) + list(target_set)}
    if len(dims) > 1:
        raise ConfigError(f"source/target embedding dims differ: {sorted(dims)}")
    params, source_metrics = train(source_train, source_val, cfg)
    target_metrics = evaluate(target_set, params, cfg)
    return source_metrics, target_metrics
