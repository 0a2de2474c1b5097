"""AdamW: Adam moments with decoupled weight decay."""

from __future__ import annotations

from typing import Iterable

import numpy as np

from .autograd import Parameter
from .errors import UninitializedGradientError


class AdamW:
    """Tracks first/second moments per parameter and applies decoupled decay.

    step() requires that backward() populated a gradient for every parameter
    in this optimizer's set since the previous step; gradients are zeroed
    after the update.
    """

    def __init__(
        self,
        params: Iterable[Parameter],
        lr: float,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
        weight_decay: float = 0.01,
        grad_clip: float | None = None,
    ):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self.grad_clip = grad_clip
        self.t = 0
        self.m = {p.name: np.zeros_like(p.data) for p in self.params}
        self.v = {p.name: np.zeros_like(p.data) for p in self.params}

    def step(self) -> None:
        for p in self.params:
            if not p.grad_populated:
                raise UninitializedGradientError(
                    f"parameter {p.name} has no gradient for this step"
                )
        self.t += 1
        if self.grad_clip is not None:
            total = np.sqrt(sum(float((p.grad**2).sum()) for p in self.params))
            scale = self.grad_clip / total if total > self.grad_clip else 1.0
        else:
            scale = 1.0
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for p in self.params:
            g = p.grad if scale == 1.0 else p.grad * scale
            m = self.m[p.name]
            v = self.v[p.name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            m_hat = m / bc1
            v_hat = v / bc2
            update = m_hat / (np.sqrt(v_hat) + self.eps) + self.weight_decay * p.data
            p.assign(p.data - self.lr * update)
            p.zero_grad()

    def state_summary(self) -> dict:
        return {"t": self.t, "lr": self.lr, "weight_decay": self.weight_decay}
