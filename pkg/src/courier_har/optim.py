"""Adam optimizer with bias correction."""

from __future__ import annotations

import numpy as np

from .errors import ShapeError


class Adam:
    """Standard Adam over a name -> Tensor parameter mapping.

    Defaults follow the conventional 0.9 / 0.999 / 1e-8 moments; the learning
    rate default is 0.001.
    """

    def __init__(self, params, lr=0.001, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = dict(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = {k: np.zeros_like(p.data) for k, p in self.params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in self.params.items()}

    def step(self, grads=None):
        """Apply one update. ``grads`` defaults to each parameter's .grad."""
        self.step_count += 1
        t = self.step_count
        bc1 = 1.0 - self.beta1**t
        bc2 = 1.0 - self.beta2**t
        for name, p in self.params.items():
            g = grads[name] if grads is not None else p.grad
            if g is None:
                continue
            g = np.asarray(g)
            if g.shape != p.data.shape:
                raise ShapeError(
                    f"gradient shape {g.shape} != parameter shape "
                    f"{p.data.shape} for '{name}'"
                )
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            update = (self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps))
            p.data -= update.astype(p.data.dtype)

    def zero_grad(self):
        for p in self.params.values():
            p.zero_grad()
