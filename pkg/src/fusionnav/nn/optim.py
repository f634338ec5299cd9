"""Trainable-parameter state and the adaptive moment-estimation update."""

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np


@dataclass
class ParamState:
    """One trainable tensor plus its gradient and optimizer moments.

    All four arrays share one shape and dtype; grad is accumulated by the
    model backward pass and consumed (then cleared by the caller) after each
    optimizer step.
    """

    value: np.ndarray
    grad: np.ndarray = field(default=None)  # type: ignore[assignment]
    opt_m: np.ndarray = field(default=None)  # type: ignore[assignment]
    opt_v: np.ndarray = field(default=None)  # type: ignore[assignment]
    step_count: int = 0

    def __post_init__(self):
        if self.grad is None:
            self.grad = np.zeros_like(self.value)
        if self.opt_m is None:
            self.opt_m = np.zeros_like(self.value)
        if self.opt_v is None:
            self.opt_v = np.zeros_like(self.value)
        shapes = {self.value.shape, self.grad.shape, self.opt_m.shape, self.opt_v.shape}
        if len(shapes) != 1:
            raise ValueError(f"ParamState arrays must share one shape, got {shapes}")

    def zero_grad(self):
        self.grad.fill(0)


def adam_step(
    params: Iterable[ParamState],
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """First/second-moment update with bias correction, applied in place."""
    if not (lr > 0):
        raise ValueError(f"learning rate must be positive, got {lr}")
    for p in params:
        p.step_count += 1
        p.opt_m *= beta1
        p.opt_m += (1.0 - beta1) * p.grad
        p.opt_v *= beta2
        p.opt_v += (1.0 - beta2) * (p.grad * p.grad)
        m_hat = p.opt_m / (1.0 - beta1**p.step_count)
        v_hat = p.opt_v / (1.0 - beta2**p.step_count)
        p.value -= lr * m_hat / (np.sqrt(v_hat) + eps)
