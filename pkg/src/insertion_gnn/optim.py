"""Adam with L2-coupled weight decay, and central-difference gradient checks."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, NumericError, ShapeError
from .rng import Rng
from .tensor import Tensor


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0

    @classmethod
    def for_param(cls, param: np.ndarray, lr: float = 1e-4,
                  weight_decay: float = 0.0, beta1: float = 0.9,
                  beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        return cls(m=np.zeros_like(param), v=np.zeros_like(param), t=0,
                   lr=lr, beta1=beta1, beta2=beta2, eps=eps,
                   weight_decay=weight_decay)


def adam_step(param: np.ndarray, grad: np.ndarray, state: AdamState) -> np.ndarray:
    """One bias-corrected Adam update; weight decay joins the gradient as L2.

    Mutates `state` (moments and step counter) and returns the new parameter.
    """
    if param.shape != grad.shape or param.shape != state.m.shape:
        raise ShapeError(
            f"adam shapes differ: param {param.shape}, grad {grad.shape}, m {state.m.shape}"
        )
    g = grad + state.weight_decay * param if state.weight_decay else grad
    state.t += 1
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * g
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * (g * g)
    m_hat = state.m / (1.0 - state.beta1**state.t)
    v_hat = state.v / (1.0 - state.beta2**state.t)
    return param - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)


def grad_check(loss_fn: Callable[[], float], params: Sequence[Tensor],
               analytic: Sequence[np.ndarray], probe_count: int,
               eps: float, rng: Rng) -> float:
    """Max relative error between analytic grads and central differences.

    Probes `probe_count` randomly chosen parameter coordinates. loss_fn must
    be deterministic (dropout disabled) and reads the params in place.
    """
    if not 1e-6 <= eps <= 1e-3:
        raise DomainError(f"grad_check eps must be in [1e-6, 1e-3], got {eps}")
    if len(params) != len(analytic):
        raise ShapeError("params and analytic gradient lists differ in length")
    sizes = [p.data.size for p in params]
    total = sum(sizes)
    worst = 0.0
    for _ in range(probe_count):
        flat = rng.below(total)
        ti = 0
        while flat >= sizes[ti]:
            flat -= sizes[ti]
            ti += 1
        data = params[ti].data
        original = data.flat[flat]
        data.flat[flat] = original + eps
        f_plus = loss_fn()
        data.flat[flat] = original - eps
        f_minus = loss_fn()
        data.flat[flat] = original
        if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
            raise NumericError("non-finite loss during grad_check probe")
        numeric = (f_plus - f_minus) / (2.0 * eps)
        a = analytic[ti].flat[flat]
        rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
        worst = max(worst, rel)
    return worst
