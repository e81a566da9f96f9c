from __future__ import annotations

import numpy as np

from ..autodiff.tensor import Tensor


def adam_step(param, grad, state, lr, beta1, beta2, eps, t, name="param"):
    """One bias-corrected Adam update.

    ``state`` is ``(m, v)``; returns ``(new_param, (m, v))`` without mutating
    the inputs.
    """
    if t < 1:
        raise ValueError("Adam step counter t must be >= 1")
    if lr <= 0 or not (0 < beta1 < 1) or not (0 < beta2 < 1) or eps <= 0:
        raise ValueError("Adam hyperparameters must be positive (betas in (0, 1))")
    grad = np.asarray(grad, dtype=np.float64)
    if not np.isfinite(grad).all():
        raise FloatingPointError(f"non-finite gradient for parameter {name!r}")
    m, v = state
    m = beta1 * m + (1 - beta1) * grad
    v = beta2 * v + (1 - beta2) * grad * grad
    m_hat = m / (1 - beta1**t)
    v_hat = v / (1 - beta2**t)
    return param - lr * m_hat / (np.sqrt(v_hat) + eps), (m, v)


class Adam:
    def __init__(self, params: dict[str, Tensor], lr=2e-4, beta1=0.5, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.state = {k: (np.zeros_like(p.data), np.zeros_like(p.data)) for k, p in params.items()}
        self.steps = 0

    def step(self, grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        self.steps += 1
        for k, p in self.params.items():
            g = grads[k]
            p.data, self.state[k] = adam_step(
                p.data, g, self.state[k], self.lr, self.beta1, self.beta2, self.eps, self.t, name=k
            )

    def state_dict(self) -> dict[str, np.ndarray]:
        out = {}
        for k, (m, v) in self.state.items():
            out[f"adam_m:{k}"] = m
            out[f"adam_v:{k}"] = v
        return out
