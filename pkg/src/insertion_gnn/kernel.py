"""Dense numeric kernel: matmul, activations, softmax, dropout, BCE, one-hot.

Matrices are plain 2-D float64 numpy arrays. Every exposed operation
checks that its output stays finite.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import DomainError, NumericError, ShapeError
from .rng import Rng

Matrix = np.ndarray

PROB_CLAMP = 1e-7
ACTIVATIONS = ("relu", "leaky_relu", "tanh", "sigmoid")


def as_matrix(x) -> Matrix:
    a = np.asarray(x, dtype=np.float64)
    if a.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got ndim={a.ndim}")
    return a


def check_finite(x: Matrix, where: str = "result") -> Matrix:
    if not np.all(np.isfinite(x)):
        raise NumericError(f"non-finite values in {where}")
    return x


def matmul(a: Matrix, b: Matrix) -> Matrix:
    a, b = as_matrix(a), as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul mismatch: {a.shape} x {b.shape}")
    return check_finite(a @ b, "matmul")


def activation(x: Matrix, kind: str, slope: float = 0.2) -> Matrix:
    x = as_matrix(x)
    if kind == "relu":
        out = np.maximum(x, 0.0)
    elif kind == "leaky_relu":
        if not 0.0 < slope < 1.0:
            raise DomainError(f"leaky_relu slope must be in (0,1), got {slope}")
        out = np.where(x >= 0.0, x, slope * x)
    elif kind == "tanh":
        out = np.tanh(x)
    elif kind == "sigmoid":
        out = 1.0 / (1.0 + np.exp(-x))
    else:
        raise DomainError(f"unknown activation {kind!r}")
    return check_finite(out, kind)


def softmax_over_set(scores: Sequence[float]) -> list[float]:
    """Stable softmax over an unordered score set; preserves input order."""
    s = np.asarray(list(scores), dtype=np.float64)
    if s.size == 0:
        raise DomainError("softmax over an empty set")
    if not np.all(np.isfinite(s)):
        raise NumericError("non-finite softmax input")
    e = np.exp(s - s.max())
    return list(e / e.sum())


def dropout_mask(rows: int, cols: int, rate: float, rng: Rng) -> Matrix:
    """Inverted-dropout mask: entries are 0 or 1/(1-rate)."""
    if not 0.0 <= rate < 1.0:
        raise DomainError(f"dropout rate must be in [0,1), got {rate}")
    if rate == 0.0:
        return np.ones((rows, cols))
    return rng.keep_mask(rows, cols, rate) / (1.0 - rate)


def dropout(x: Matrix, rate: float, rng: Rng, training: bool) -> Matrix:
    x = as_matrix(x)
    if not 0.0 <= rate < 1.0:
        raise DomainError(f"dropout rate must be in [0,1), got {rate}")
    if not training or rate == 0.0:
        return x
    return x * dropout_mask(x.shape[0], x.shape[1], rate, rng)


def clamp_probs(p: np.ndarray) -> np.ndarray:
    return np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP)


def bce_loss(pred_probs: Sequence[float], labels: Sequence[int]) -> float:
    """Mean binary cross-entropy; predictions clamped before the logs."""
    p = np.asarray(list(pred_probs), dtype=np.float64).ravel()
    y = np.asarray(list(labels), dtype=np.float64).ravel()
    if p.shape != y.shape:
        raise ShapeError(f"bce length mismatch: {p.shape} vs {y.shape}")
    pc = clamp_probs(p)
    loss = -float(np.mean(y * np.log(pc) + (1.0 - y) * np.log(1.0 - pc)))
    if not np.isfinite(loss):
        raise NumericError("non-finite bce loss")
    return loss


def one_hot(label: int, n: int = 4) -> np.ndarray:
    """Column vector (n,1) with a single 1 at `label`."""
    if not 0 <= label < n:
        raise DomainError(f"label {label} outside 0..{n - 1}")
    v = np.zeros((n, 1))
    v[label, 0] = 1.0
    return v
