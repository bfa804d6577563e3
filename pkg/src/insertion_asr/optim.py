"""Adam with the warmup-then-inverse-sqrt learning-rate schedule."""

from __future__ import annotations

import numpy as np

from .params import ParameterStore


def warmup_inv_sqrt_rate(step: int, model_dim: int, lr_scale: float = 1.0, warmup: int = 500) -> float:
    """lr = scale * dim^-0.5 * min(step^-0.5, step * warmup^-1.5), step >= 1."""
    return lr_scale * model_dim**-0.5 * min(step**-0.5, step * warmup**-1.5)


class Adam:
    def __init__(
        self,
        store: ParameterStore,
        model_dim: int,
        lr_scale: float = 1.0,
        warmup: int = 500,
        beta1: float = 0.9,
        beta2: float = 0.98,
        eps: float = 1e-9,
    ):
        self.store = store
        self.model_dim = model_dim
        self.lr_scale = lr_scale
        self.warmup = warmup
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self._m = {name: np.zeros_like(p.value) for name, p in store.items()}
        self._v = {name: np.zeros_like(p.value) for name, p in store.items()}

    def step(self, grads: dict[str, np.ndarray]) -> float:
        """Apply one update from accumulated gradients; returns the rate used."""
        self.step_count += 1
        rate = warmup_inv_sqrt_rate(self.step_count, self.model_dim, self.lr_scale, self.warmup)
        b1, b2 = self.beta1, self.beta2
        bias1 = 1.0 - b1**self.step_count
        bias2 = 1.0 - b2**self.step_count
        for name, p in self.store.items():
            g = grads.get(name)
            if g is None:
                continue
            m = self._m[name]
            v = self._v[name]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            update = (m / bias1) / (np.sqrt(v / bias2) + self.eps)
            p.value = p.value - rate * update
        return rate
