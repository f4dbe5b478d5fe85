"""Reverse-mode tape over 2-D float64 arrays.

Covers exactly the operations the fixed model graph needs (matmul,
broadcast add/mul, activations, masked row softmax, row renormalization,
concat/slice/gather, padding, block pooling, clamped log, means). Each op
stores a closure that scatters the output gradient to its parents; every
backward rule is validated by finite differences in the test suite.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from . import kernel
from .errors import ShapeError
from .rng import Rng


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, _parents=(), _backward=None):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim != 2:
            raise ShapeError(f"tensors are 2-D, got ndim={arr.ndim}")
        self.data = arr
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backward = _backward

    @property
    def shape(self):
        return self.data.shape

    @property
    def needs_grad(self) -> bool:
        return self.requires_grad or bool(self._parents)

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def zero_grad(self) -> None:
        self.grad = None

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = g.copy()
        else:
            self.grad += g

    def backward(self) -> None:
        if self.data.size != 1:
            raise ShapeError("backward() starts from a scalar loss")
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.needs_grad and id(p) not in seen:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        return matmul(self, other)

    def __add__(self, other) -> "Tensor":
        return add(self, other)

    def __mul__(self, other) -> "Tensor":
        return mul(self, other)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


def constant(data) -> Tensor:
    return Tensor(data)


def parameter(data) -> Tensor:
    return Tensor(data, requires_grad=True)


def _unbroadcast(g: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    if g.shape == shape:
        return g
    if shape[0] == 1 and g.shape[0] > 1:
        g = g.sum(axis=0, keepdims=True)
    if shape[1] == 1 and g.shape[1] > 1:
        g = g.sum(axis=1, keepdims=True)
    return g


def _broadcastable(a: tuple[int, int], b: tuple[int, int]) -> bool:
    return all(x == y or x == 1 or y == 1 for x, y in zip(a, b))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape[1] != b.data.shape[0]:
        raise ShapeError(f"matmul mismatch: {a.data.shape} x {b.data.shape}")
    out = Tensor(a.data @ b.data, _parents=(a, b))

    def backward(g):
        if a.needs_grad:
            a._accumulate(g @ b.data.T)
        if b.needs_grad:
            b._accumulate(a.data.T @ g)

    out._backward = backward
    return out


def add(a: Tensor, b) -> Tensor:
    if not isinstance(b, Tensor):
        out = Tensor(a.data + float(b), _parents=(a,))
        out._backward = lambda g: a._accumulate(g)
        return out
    if not _broadcastable(a.data.shape, b.data.shape):
        raise ShapeError(f"add mismatch: {a.data.shape} + {b.data.shape}")
    out = Tensor(a.data + b.data, _parents=(a, b))

    def backward(g):
        if a.needs_grad:
            a._accumulate(_unbroadcast(g, a.data.shape))
        if b.needs_grad:
            b._accumulate(_unbroadcast(g, b.data.shape))

    out._backward = backward
    return out


def mul(a: Tensor, b) -> Tensor:
    if not isinstance(b, Tensor):
        if isinstance(b, np.ndarray):
            b = Tensor(b)
        else:
            s = float(b)
            out = Tensor(a.data * s, _parents=(a,))
            out._backward = lambda g: a._accumulate(g * s)
            return out
    if not _broadcastable(a.data.shape, b.data.shape):
        raise ShapeError(f"mul mismatch: {a.data.shape} * {b.data.shape}")
    out = Tensor(a.data * b.data, _parents=(a, b))

    def backward(g):
        if a.needs_grad:
            a._accumulate(_unbroadcast(g * b.data, a.data.shape))
        if b.needs_grad:
            b._accumulate(_unbroadcast(g * a.data, b.data.shape))

    out._backward = backward
    return out


def transpose(a: Tensor) -> Tensor:
    out = Tensor(a.data.T, _parents=(a,))
    out._backward = lambda g: a._accumulate(g.T)
    return out


def leaky_relu(a: Tensor, slope: float) -> Tensor:
    out = Tensor(np.where(a.data >= 0.0, a.data, slope * a.data), _parents=(a,))
    out._backward = lambda g: a._accumulate(g * np.where(a.data >= 0.0, 1.0, slope))
    return out


def relu(a: Tensor) -> Tensor:
    out = Tensor(np.maximum(a.data, 0.0), _parents=(a,))
    out._backward = lambda g: a._accumulate(g * (a.data > 0.0))
    return out


def tanh(a: Tensor) -> Tensor:
    out = Tensor(np.tanh(a.data), _parents=(a,))
    out._backward = lambda g: a._accumulate(g * (1.0 - out.data**2))
    return out


def sigmoid(a: Tensor) -> Tensor:
    out = Tensor(1.0 / (1.0 + np.exp(-a.data)), _parents=(a,))
    out._backward = lambda g: a._accumulate(g * out.data * (1.0 - out.data))
    return out


def log(a: Tensor) -> Tensor:
    out = Tensor(np.log(a.data), _parents=(a,))
    out._backward = lambda g: a._accumulate(g / a.data)
    return out


def clamp(a: Tensor, lo: float, hi: float) -> Tensor:
    out = Tensor(np.clip(a.data, lo, hi), _parents=(a,))
    inside = ((a.data > lo) & (a.data < hi)).astype(np.float64)
    out._backward = lambda g: a._accumulate(g * inside)
    return out


def masked_row_softmax(a: Tensor, mask: np.ndarray) -> Tensor:
    """Row-wise softmax restricted to `mask`; masked-out entries are 0.

    Rows are shifted by their masked max before exponentiation.
    """
    if mask.shape != a.data.shape:
        raise ShapeError(f"mask shape {mask.shape} != {a.data.shape}")
    neg = np.where(mask, a.data, -np.inf)
    shifted = neg - neg.max(axis=1, keepdims=True)
    e = np.where(mask, np.exp(shifted), 0.0)
    y = e / e.sum(axis=1, keepdims=True)
    out = Tensor(y, _parents=(a,))

    def backward(g):
        dot = (g * y).sum(axis=1, keepdims=True)
        a._accumulate(y * (g - dot))

    out._backward = backward
    return out


def row_normalize(a: Tensor, guard: float = 1e-12) -> Tensor:
    """Divide each row by its sum; rows with sum <= guard become zero."""
    s = a.data.sum(axis=1, keepdims=True)
    safe = s > guard
    y = np.where(safe, a.data / np.where(safe, s, 1.0), 0.0)
    out = Tensor(y, _parents=(a,))

    def backward(g):
        dot = (g * y).sum(axis=1, keepdims=True)
        a._accumulate(np.where(safe, (g - dot) / np.where(safe, s, 1.0), 0.0))

    out._backward = backward
    return out


def concat_cols(parts: Sequence[Tensor]) -> Tensor:
    widths = [p.data.shape[1] for p in parts]
    out = Tensor(np.concatenate([p.data for p in parts], axis=1), _parents=tuple(parts))

    def backward(g):
        at = 0
        for p, w in zip(parts, widths):
            if p.needs_grad:
                p._accumulate(g[:, at : at + w])
            at += w

    out._backward = backward
    return out


def concat_rows(parts: Sequence[Tensor]) -> Tensor:
    heights = [p.data.shape[0] for p in parts]
    out = Tensor(np.concatenate([p.data for p in parts], axis=0), _parents=tuple(parts))

    def backward(g):
        at = 0
        for p, h in zip(parts, heights):
            if p.needs_grad:
                p._accumulate(g[at : at + h, :])
            at += h

    out._backward = backward
    return out


def slice_rows(a: Tensor, r0: int, r1: int) -> Tensor:
    out = Tensor(a.data[r0:r1, :], _parents=(a,))

    def backward(g):
        gz = np.zeros_like(a.data)
        gz[r0:r1, :] = g
        a._accumulate(gz)

    out._backward = backward
    return out


def slice_cols(a: Tensor, c0: int, c1: int) -> Tensor:
    out = Tensor(a.data[:, c0:c1], _parents=(a,))

    def backward(g):
        gz = np.zeros_like(a.data)
        gz[:, c0:c1] = g
        a._accumulate(gz)

    out._backward = backward
    return out


def gather_rows(a: Tensor, idx: Iterable[int]) -> Tensor:
    rows = list(idx)
    out = Tensor(a.data[rows, :], _parents=(a,))

    def backward(g):
        gz = np.zeros_like(a.data)
        np.add.at(gz, rows, g)
        a._accumulate(gz)

    out._backward = backward
    return out


def pad_rows(a: Tensor, total_rows: int) -> Tensor:
    r, c = a.data.shape
    if total_rows < r:
        raise ShapeError(f"cannot pad {r} rows down to {total_rows}")
    padded = np.zeros((total_rows, c))
    padded[:r, :] = a.data
    out = Tensor(padded, _parents=(a,))
    out._backward = lambda g: a._accumulate(g[:r, :])
    return out


def block_mean_pool(a: Tensor, block_rows: int, block_cols: int) -> Tensor:
    """Non-overlapping average pooling over block_rows x block_cols tiles."""
    r, c = a.data.shape
    if r % block_rows or c % block_cols:
        raise ShapeError(f"{a.data.shape} not tileable by {block_rows}x{block_cols}")
    br, bc = r // block_rows, c // block_cols
    y = a.data.reshape(br, block_rows, bc, block_cols).mean(axis=(1, 3))
    out = Tensor(y, _parents=(a,))
    scale = 1.0 / (block_rows * block_cols)

    def backward(g):
        a._accumulate(np.kron(g, np.ones((block_rows, block_cols))) * scale)

    out._backward = backward
    return out


def reshape(a: Tensor, rows: int, cols: int) -> Tensor:
    if rows * cols != a.data.size:
        raise ShapeError(f"cannot reshape {a.data.shape} to ({rows}, {cols})")
    out = Tensor(a.data.reshape(rows, cols), _parents=(a,))
    out._backward = lambda g: a._accumulate(g.reshape(a.data.shape))
    return out


def mean_all(a: Tensor) -> Tensor:
    out = Tensor([[a.data.mean()]], _parents=(a,))
    inv = 1.0 / a.data.size
    out._backward = lambda g: a._accumulate(np.full_like(a.data, g[0, 0] * inv))
    return out


def dropout(a: Tensor, rate: float, rng: Rng, training: bool) -> Tensor:
    """Inverted dropout as a constant-mask multiply; identity at inference."""
    if not training or rate == 0.0:
        return a
    mask = kernel.dropout_mask(a.data.shape[0], a.data.shape[1], rate, rng)
    return mul(a, mask)


def bce_with_targets(pred: Tensor, targets: np.ndarray) -> Tensor:
    """Mean BCE of column-vector predictions against 0/1 targets.

    Mirrors kernel.bce_loss arithmetic so the two agree bit-for-bit.
    """
    if pred.data.shape != targets.shape:
        raise ShapeError(f"bce mismatch: {pred.data.shape} vs {targets.shape}")
    pc = clamp(pred, kernel.PROB_CLAMP, 1.0 - kernel.PROB_CLAMP)
    one_minus = add(mul(pc, -1.0), 1.0)
    terms = add(mul(log(pc), targets), mul(log(one_minus), 1.0 - targets))
    return mul(mean_all(terms), -1.0)
