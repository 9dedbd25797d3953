"""Finite-difference verification of analytic gradients.

Central differences with step 1e-5 against the recorded-graph gradients.
The relative error denominator is floored at 1e-4 so coordinates whose true
gradient is essentially zero are judged on an absolute scale instead of
amplifying finite-difference round-off.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .model import PairModel

FD_STEP = 1e-5
REL_TOLERANCE = 1e-4
_REL_FLOOR = 1e-4


def relative_errors(analytic: np.ndarray, numeric: np.ndarray) -> np.ndarray:
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), _REL_FLOOR)
    return np.abs(analytic - numeric) / scale


def check_tensor(loss_fn, tensor: Tensor, step: float = FD_STEP) -> float:
    """Max relative error between d(loss)/d(tensor) and central differences.

    ``loss_fn`` must rebuild the forward graph from current tensor values and
    return the loss Tensor; it is re-run twice per coordinate.
    """
    tensor.grad = None
    loss = loss_fn()
    ad.backward(loss)
    analytic = np.zeros_like(tensor.values) if tensor.grad is None else tensor.grad.copy()
    tensor.grad = None

    flat = tensor.values.reshape(-1)
    numeric = np.zeros_like(flat)
    for i in range(flat.size):
        saved = flat[i]
        flat[i] = saved + step
        up = loss_fn().item()
        flat[i] = saved - step
        down = loss_fn().item()
        flat[i] = saved
        numeric[i] = (up - down) / (2.0 * step)
    return float(relative_errors(analytic.reshape(-1), numeric).max())


def check_model(model: PairModel, padded1: list[str], padded2: list[str],
                label: int = 1, step: float = FD_STEP) -> dict[str, float]:
    """Finite-difference check of every parameter group of a pair model.

    Runs in eval mode so the loss is a deterministic function of the
    parameters.  Returns {parameter name: max relative error}.
    """

    def loss_fn():
        prob = model.forward_pair(padded1, padded2, mode="eval")
        return ad.bce_loss(prob, label)

    return {
        name: check_tensor(loss_fn, tensor, step=step)
        for name, tensor in model.params.named().items()
    }
