from __future__ import annotations

from typing import Callable, Optional

import numpy as np

from .tensor import Tensor, backward


def grad_check(
    builder: Callable[[Tensor], Tensor],
    point: Tensor,
    step: float = 1e-5,
    coords: Optional[int] = None,
    seed: int = 0,
    floor: Optional[float] = 1.0,
    kink_retries: int = 0,
) -> float:
    """Compare analytic and central-difference gradients of ``builder(point)``.

    ``point`` is perturbed in place, so a builder may ignore its argument and
    close over the same tensor (useful for network parameters). When
    ``coords`` is given, only that many randomly chosen coordinates are
    probed.

    Returns ``max |analytic - numeric| / max(floor, |numeric|)``. With
    ``floor=None`` the floor is 1e-3 times the largest probed analytic
    component, so the check stays relative when all gradients are small.

    Central differences are meaningless across a kink (ReLU, leaky ReLU).
    With ``kink_retries > 0`` a probe whose second difference
    ``|f(x+h) - 2 f(x) + f(x-h)|`` exceeds ``1e-5 * h`` is taken to straddle
    one and is repeated with ``h / 10``, up to that many times. A smooth
    function gives a second difference of order ``h**2``, so only
    non-smooth probes are re-run.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    point.data = np.ascontiguousarray(point.data)
    point.requires_grad = True
    point.grad = None
    loss = builder(point)
    if loss.size != 1:
        raise ValueError(f"builder must return a scalar, got shape {loss.shape}")
    if not np.isfinite(loss.data).all():
        raise FloatingPointError("builder returned a non-finite loss")
    backward(loss, [point])
    centre = loss.item()
    analytic = point.grad.reshape(-1).copy()
    if not np.isfinite(analytic).all():
        raise FloatingPointError("analytic gradient is not finite")

    flat = point.data.reshape(-1)
    idx = np.arange(flat.size)
    if coords is not None and coords < flat.size:
        idx = np.sort(np.random.default_rng(seed).choice(flat.size, coords, replace=False))
    if floor is None:
        floor = max(1e-3 * float(np.abs(analytic[idx]).max(initial=0.0)), 1e-300)
    worst = 0.0
    # builders may take inner gradients, so probes run with recording on
    for i in idx:
        orig = flat[i]
        h = step
        for attempt in range(kink_retries + 1):
            flat[i] = orig + h
            up = builder(point).item()
            flat[i] = orig - h
            down = builder(point).item()
            flat[i] = orig
            if not (np.isfinite(up) and np.isfinite(down)):
                raise FloatingPointError(f"non-finite loss while probing coordinate {i}")
            smooth = abs(up - 2 * centre + down) <= 1e-5 * h * max(1.0, abs(centre))
            if smooth or attempt == kink_retries:
                break
            h /= 10
        numeric = (up - down) / (2 * h)
        err = abs(analytic[i] - numeric) / max(floor, abs(numeric))
        worst = max(worst, err)
    return worst
