"""Layer-level functions built from tensor primitives."""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .tensor import Tensor, as_tensor

BN_EPS = 1e-5
BN_MOMENTUM = 0.1
LEAKY_SLOPE = 0.2


def batch_norm(
    x,
    gamma,
    beta,
    running_mean: np.ndarray | None = None,
    running_var: np.ndarray | None = None,
    training: bool = True,
    momentum: float = BN_MOMENTUM,
    eps: float = BN_EPS,
) -> Tensor:
    """Per-channel batch normalization over N x C x H x W.

    In training mode the batch statistics normalize the input and the running
    buffers (if given) are updated in place; in eval mode the running buffers
    are used.
    """
    x = as_tensor(x)
    if x.ndim != 4:
        raise ValueError(f"batch_norm expects N x C x H x W, got {x.shape}")
    c = x.shape[1]
    axes = (0, 2, 3)
    if training:
        count = x.shape[0] * x.shape[2] * x.shape[3]
        if count < 2:
            raise ValueError(f"batch_norm in train mode needs N*H*W >= 2, got {count}")
        mu = T.mean(x, axes, keepdims=True)
        centered = x - mu
        var = T.mean(centered * centered, axes, keepdims=True)
        if running_mean is not None:
            running_mean *= 1.0 - momentum
            running_mean += momentum * mu.data.reshape(c)
        if running_var is not None:
            unbiased = var.data.reshape(c) * count / (count - 1)
            running_var *= 1.0 - momentum
            running_var += momentum * unbiased
    else:
        if running_mean is None or running_var is None:
            raise ValueError("eval-mode batch_norm needs running statistics")
        centered = x - running_mean.reshape(1, c, 1, 1)
        var = Tensor(running_var.reshape(1, c, 1, 1))
    normed = centered / T.sqrt(var + eps)
    return normed * T.reshape(gamma, (1, c, 1, 1)) + T.reshape(beta, (1, c, 1, 1))


def activation(kind: str, x, slope: float = LEAKY_SLOPE) -> Tensor:
    if kind == "relu":
        return T.relu(x)
    if kind == "leaky_relu":
        return T.leaky_relu(x, slope)
    if kind == "tanh":
        return T.tanh(x)
    if kind == "sigmoid":
        return T.sigmoid(x)
    raise ValueError(f"unknown activation {kind!r}")


def cross_entropy(logits, targets) -> Tensor:
    """Mean cross-entropy against soft (or one-hot) target rows."""
    logits = as_tensor(logits)
    targets = np.asarray(targets, dtype=np.float64)
    if targets.ndim == 1:
        targets = np.eye(logits.shape[1])[targets.astype(int)]
    logp = T.log_softmax(logits, axis=1)
    return T.neg(T.sum_(logp * targets)) * (1.0 / logits.shape[0])


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)
