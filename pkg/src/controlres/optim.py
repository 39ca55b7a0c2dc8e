"""Adam optimizer over Tensor parameters."""

from __future__ import annotations

import numpy as np

from .tensor import Tensor


class Adam:
    """Bias-corrected Adam. State: first/second moments per parameter and a
    shared step counter; the step is rejected (state untouched) if any
    gradient is non-finite.
    """

    def __init__(self, params, lr: float = 1e-4, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params: list[Tensor] = list(params)
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def step(self):
        grads = []
        for p in self.params:
            if p.grad is None:
                raise ValueError("parameter has no gradient; run backward first")
            if p.grad.shape != p.data.shape:
                raise ValueError("gradient shape does not match parameter shape")
            if not np.isfinite(p.grad).all():
                raise FloatingPointError("non-finite gradient: step rejected")
            grads.append(p.grad)

        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            # reassign instead of -=: graphs recorded before the step keep
            # referencing the forward-time array
            p.data = p.data - self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)
