"""Spectral normalization and the gradient penalty."""

from __future__ import annotations

from typing import Callable

import numpy as np

from ..autodiff import tensor as T
from ..autodiff.tensor import Tensor, grad

SIGMA_FLOOR = 1e-12
GP_EPS = 1e-12


def _unit(v: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(v)
    return v / n if n > 0 else v


def power_iteration(w2d: np.ndarray, u: np.ndarray, n_iters: int):
    """Run ``n_iters`` power-iteration steps; returns ``(u, v, sigma)``."""
    if n_iters < 1:
        raise ValueError("n_power_iters must be >= 1")
    if not np.any(u):
        raise ValueError("power-iteration vector u must be nonzero")
    u = _unit(np.asarray(u, dtype=np.float64))
    v = np.zeros(w2d.shape[1])
    for _ in range(n_iters):
        v = _unit(w2d.T @ u)
        u_next = _unit(w2d @ v)
        if np.any(u_next):
            u = u_next
    sigma = float(u @ w2d @ v)
    return u, v, max(sigma, SIGMA_FLOOR)


def spectral_normalize(weight, u, n_power_iters: int = 1):
    """Divide a 2-D weight by its power-iteration estimate of the top singular value.

    Returns ``(normalized_weight, updated_u, sigma)``. Weights with more than
    two axes are flattened to ``(shape[0], -1)`` and returned in their
    original shape.
    """
    w = np.asarray(weight, dtype=np.float64)
    w2d = w.reshape(w.shape[0], -1)
    u, _, sigma = power_iteration(w2d, u, n_power_iters)
    return w / sigma, u, sigma


def spectral_weight(weight: Tensor, u: np.ndarray, n_power_iters: int, update: bool):
    """Differentiable ``weight / sigma`` with sigma = u^T W v at fixed u, v.

    When ``update`` is set, ``u`` is refreshed in place with the new estimate.
    """
    w2d = weight.data.reshape(weight.shape[0], -1)
    u_new, v, sigma = power_iteration(w2d, u, n_power_iters)
    if update:
        u[...] = u_new
    if sigma <= SIGMA_FLOOR:
        return weight * (1.0 / SIGMA_FLOOR)
    outer = np.outer(u_new, v).reshape(weight.shape)
    sigma_t = T.sum_(weight * outer)
    return weight / sigma_t


def interpolate(real: np.ndarray, fake: np.ndarray, rng) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(rng)
    alpha = rng.uniform(size=(real.shape[0],) + (1,) * (real.ndim - 1))
    return alpha * real + (1.0 - alpha) * fake, alpha


def gradient_penalty(
    critic: Callable[[Tensor], Tensor],
    real,
    fake,
    lam: float = 10.0,
    seed=0,
) -> Tensor:
    """``lam * mean((||d critic / d x_hat||_2 - 1)^2)`` at random interpolates.

    The result stays differentiable with respect to the critic's parameters.
    ``seed`` may be an int or a ``numpy.random.Generator``.
    """
    real = np.asarray(getattr(real, "data", real), dtype=np.float64)
    fake = np.asarray(getattr(fake, "data", fake), dtype=np.float64)
    if real.shape != fake.shape:
        raise ValueError(f"real {real.shape} and fake {fake.shape} batches differ in shape")
    if lam < 0:
        raise ValueError("gradient-penalty weight must be >= 0")
    mixed, _ = interpolate(real, fake, seed)
    x_hat = Tensor(mixed, requires_grad=True)
    scores = critic(x_hat)
    (g,) = grad(T.sum_(scores), [x_hat], create_graph=True)
    axes = tuple(range(1, g.ndim))
    norms = T.sqrt(T.sum_(g * g, axes) + GP_EPS)
    dev = norms - 1.0
    return T.mean(dev * dev) * lam
