"""Adadelta parameter updates.

Per parameter, two running accumulators track decayed squared gradients and
decayed squared updates.  The step size adapts per coordinate with no global
learning-rate schedule; ``lr`` scales the applied update only.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor
from .errors import ShapeError


@dataclass
class AdadeltaState:
    """Running accumulators for one parameter tensor."""

    shape: tuple[int, ...]
    rho: float = 0.95
    eps: float = 1e-6
    accum_grad_sq: np.ndarray = field(init=False)
    accum_update_sq: np.ndarray = field(init=False)

    def __post_init__(self):
        if not 0.0 <= self.rho < 1.0:
            raise ValueError(f"adadelta: rho must be in [0, 1), got {self.rho}")
        if self.eps <= 0.0:
            raise ValueError(f"adadelta: eps must be positive, got {self.eps}")
        self.accum_grad_sq = np.zeros(self.shape)
        self.accum_update_sq = np.zeros(self.shape)


def adadelta_step(param: Tensor, state: AdadeltaState, lr: float = 1.0) -> None:
    """Apply one in-place Adadelta update using ``param.grad``.

    E[g^2] <- rho E[g^2] + (1-rho) g^2
    delta  =  -(RMS[dx] / RMS[g]) * g     with RMS[v] = sqrt(E[v^2] + eps),
                                          RMS[dx] read before this step's update
    E[dx^2] <- rho E[dx^2] + (1-rho) delta^2
    param  += lr * delta

    The gradient slot is left intact; callers clear it between batches.
    """
    if param.grad is None:
        raise ValueError("adadelta_step: parameter has no accumulated gradient")
    if param.grad.shape != param.values.shape or state.accum_grad_sq.shape != param.values.shape:
        raise ShapeError(
            f"adadelta_step: grad {param.grad.shape} / state {state.accum_grad_sq.shape} "
            f"do not match parameter {param.values.shape}"
        )
    g = param.grad
    rho, eps = state.rho, state.eps
    state.accum_grad_sq *= rho
    state.accum_grad_sq += (1.0 - rho) * g * g
    delta = -(np.sqrt(state.accum_update_sq + eps) / np.sqrt(state.accum_grad_sq + eps)) * g
    state.accum_update_sq *= rho
    state.accum_update_sq += (1.0 - rho) * delta * delta
    param.values += lr * delta
