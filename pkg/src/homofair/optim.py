"""Adaptive-moment optimizer for the tensor parameters.

Standard Adam with bias correction; weight decay is coupled (added to
the gradient), so decay with zero gradient shrinks parameters toward 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import NonFiniteError, Tensor

__all__ = ["OptimizerState", "optimizer_step"]


@dataclass
class OptimizerState:
    """Per-parameter moment estimates plus the scalar knobs."""

    lr: float
    weight_decay: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_params(cls, params: list[Tensor], lr: float,
                   weight_decay: float = 0.0) -> "OptimizerState":
        if lr <= 0:
            raise ValueError(f"learning rate must be positive, got {lr}")
        if weight_decay < 0:
            raise ValueError(f"weight decay must be nonnegative, got {weight_decay}")
        return cls(lr=lr, weight_decay=weight_decay,
                   m=[np.zeros(p.shape) for p in params],
                   v=[np.zeros(p.shape) for p in params])


def optimizer_step(params: list[Tensor], grads: list[np.ndarray],
                   state: OptimizerState) -> OptimizerState:
    """One Adam update of ``params`` in place; returns the advanced state.

    Fails fast on NaN/Inf gradients rather than corrupting the moments.
    """
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError(
            f"parameter/gradient/state count mismatch: {len(params)} params, "
            f"{len(grads)} grads, {len(state.m)} moment slots")
    state.step += 1
    t = state.step
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t
    for i, (p, g) in enumerate(zip(params, grads)):
        g = np.asarray(g, dtype=np.float64)
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {p.shape}")
        if not np.isfinite(g).all():
            raise NonFiniteError(f"non-finite gradient for parameter {i}")
        if state.weight_decay != 0.0:
            g = g + state.weight_decay * p.values
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g
        m_hat = state.m[i] / bc1
        v_hat = state.v[i] / bc2
        p.values = p.values - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return state
