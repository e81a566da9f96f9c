"""Exact O(N^2) t-SNE.

Gaussian conditionals with per-point bandwidths found by bisection on the
perplexity, symmetrized joints ``p_ij = (p_j|i + p_i|j) / 2n``, Student-t
output kernel, and plain momentum gradient descent with early exaggeration.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .pca import pca

log = logging.getLogger(__name__)

Q_FLOOR = 1e-12


class PerplexityWarning(UserWarning):
    pass


@dataclass
class Calibration:
    sigma: float
    perplexity: float
    flagged: bool


@dataclass
class AffinityMatrix:
    P: np.ndarray
    perplexity: float
    sigmas: np.ndarray
    flagged: np.ndarray

    def check(self, tol: float = 1e-9) -> None:
        P = self.P
        if not np.allclose(P, P.T, atol=tol, rtol=0):
            raise ValueError("affinities are not symmetric")
        if (P < 0).any() or abs(P.sum() - 1.0) > tol or np.any(np.diag(P) != 0):
            raise ValueError("affinities must be nonnegative with unit mass and zero diagonal")


@dataclass
class EmbeddingLayout:
    Y: np.ndarray
    labels: np.ndarray
    source: np.ndarray
    final_kl: float
    initial_kl: float = math.nan
    best_iteration: int = 0

    def __post_init__(self):
        self.Y = np.asarray(self.Y, dtype=np.float64)
        n = len(self.Y)
        self.labels = np.zeros(n, dtype=np.int64) if self.labels is None else np.asarray(self.labels)
        self.source = np.full(n, "real") if self.source is None else np.asarray(self.source)
        if not np.isfinite(self.Y).all():
            raise ValueError("layout coordinates must be finite")
        if len(self.labels) != n or len(self.source) != n:
            raise ValueError("labels and source must have one entry per point")


def _conditional(d2: np.ndarray, sigma: float) -> np.ndarray:
    logits = -(d2 - d2.min()) / (2.0 * sigma * sigma)
    w = np.exp(logits)
    return w / w.sum()


def _perplexity(p: np.ndarray) -> float:
    nz = p[p > 0]
    return float(2.0 ** (-(nz * np.log2(nz)).sum()))


def conditional_perplexity(dist_row, sigma: float) -> float:
    d = np.asarray(dist_row, dtype=np.float64)
    return _perplexity(_conditional(d * d, sigma))


def perplexity_calibration(dist_row, target: float, tol: float = 1e-10, max_iters: int = 200) -> Calibration:
    """Bandwidth whose Gaussian conditional has perplexity ``target``.

    ``dist_row`` holds distances from one point to every other point (self
    excluded). Perplexity rises monotonically with sigma from the count of
    nearest tied neighbours up to ``len(dist_row)``; targets outside that
    range return the boundary sigma with ``flagged`` set.
    """
    d = np.asarray(dist_row, dtype=np.float64)
    if target < 1:
        raise ValueError("target perplexity must be >= 1")
    if d.size == 0 or not (d > 0).any():
        raise ValueError("need at least one positive distance")
    d2 = d * d
    n = d.size
    ties = int(np.sum(d2 == d2.min()))
    if target > n + tol or target < ties - tol:
        sigma = float(np.sqrt(d2.max())) * 1e6 if target > n else float(np.sqrt(d2[d2 > 0].min())) * 1e-6
        perp = _perplexity(_conditional(d2, sigma))
        warnings.warn(
            f"perplexity {target} unreachable: this row allows [{ties}, {n}]", PerplexityWarning, stacklevel=2
        )
        return Calibration(sigma, perp, True)
    if ties == n:
        # all neighbours equidistant: every sigma gives perplexity n
        return Calibration(float(np.sqrt(d2.mean())), float(n), False)
    hi = float(np.sqrt(d2.mean()))
    for _ in range(1000):
        if _perplexity(_conditional(d2, hi)) >= target:
            break
        hi *= 2.0
    lo = hi
    for _ in range(1000):
        if _perplexity(_conditional(d2, lo)) <= target:
            break
        lo /= 2.0
    sigma, perp = hi, _perplexity(_conditional(d2, hi))
    for _ in range(max_iters):
        sigma = float(np.sqrt(lo * hi))
        perp = _perplexity(_conditional(d2, sigma))
        if abs(perp - target) <= tol or hi - lo <= 1e-15 * hi:
            break
        if perp > target:
            hi = sigma
        else:
            lo = sigma
    return Calibration(sigma, perp, abs(perp - target) > 1e-3)


def squared_distances(x: np.ndarray) -> np.ndarray:
    diff = x[:, None, :] - x[None, :, :]
    return (diff * diff).sum(axis=-1)


def joint_affinities(x, perplexity: float = 30.0, tol: float = 1e-10) -> AffinityMatrix:
    x = np.asarray(x, dtype=np.float64)
    n = len(x)
    d2 = squared_distances(x)
    cond = np.zeros((n, n))
    sigmas = np.empty(n)
    flags = np.zeros(n, dtype=bool)
    for i in range(n):
        others = np.delete(np.arange(n), i)
        cal = perplexity_calibration(np.sqrt(d2[i, others]), perplexity, tol)
        sigmas[i], flags[i] = cal.sigma, cal.flagged
        cond[i, others] = _conditional(d2[i, others], cal.sigma)
    P = (cond + cond.T) / (2.0 * n)
    return AffinityMatrix(P, perplexity, sigmas, flags)


def _student_t(Y: np.ndarray):
    num = 1.0 / (1.0 + squared_distances(Y))
    np.fill_diagonal(num, 0.0)
    return num, num / num.sum()


def kl_divergence(P: np.ndarray, Y) -> float:
    _, Q = _student_t(np.asarray(Y, dtype=np.float64))
    mask = P > 0
    return float((P[mask] * np.log(P[mask] / np.maximum(Q[mask], Q_FLOOR))).sum())


def kl_and_gradient(P, Y) -> tuple[float, np.ndarray]:
    """``KL(P || Q)`` and ``4 sum_j (p_ij - q_ij)(y_i - y_j) / (1 + |y_i - y_j|^2)``."""
    P = getattr(P, "P", P)
    Y = np.asarray(Y, dtype=np.float64)
    num, Q = _student_t(Y)
    mask = P > 0
    kl = float((P[mask] * np.log(P[mask] / np.maximum(Q[mask], Q_FLOOR))).sum())
    w = (P - Q) * num
    grad = 4.0 * (w.sum(axis=1)[:, None] * Y - w @ Y)
    return kl, grad


def tsne(
    x,
    perplexity: float = 30.0,
    n_iter: int = 1000,
    learning_rate: float = 200.0,
    momentum: tuple[float, float, int] = (0.5, 0.8, 250),
    exaggeration: float = 12.0,
    exaggeration_iters: int = 250,
    seed=0,
    pca_dims: int | None = 50,
    labels=None,
    source=None,
) -> EmbeddingLayout:
    """2-D t-SNE layout; returns the lowest-KL iterate seen.

    ``momentum`` is ``(early, late, switch_iteration)``. Set ``exaggeration``
    to 1 to follow the plain descent without the early phase.
    """
    x = np.asarray(x, dtype=np.float64)
    n = len(x)
    if n < 4:
        raise ValueError(f"t-SNE needs at least 4 points, got {n}")
    if not 1 <= perplexity < n:
        raise ValueError(f"perplexity must lie in [1, N) = [1, {n}), got {perplexity}")
    if pca_dims and x.shape[1] > pca_dims:
        # a full-rank projection (N - 1 dims) keeps every pairwise distance
        x = pca(x, min(pca_dims, n - 1)).projection
    aff = joint_affinities(x, perplexity)
    P = aff.P
    rng = np.random.default_rng(seed)
    Y = rng.standard_normal((n, 2)) * 1e-2
    prev = Y.copy()
    kl0 = kl_divergence(P, Y)
    best, best_kl, best_it = Y.copy(), kl0, 0
    early, late, switch = momentum
    for it in range(1, n_iter + 1):
        scale = exaggeration if it <= exaggeration_iters else 1.0
        _, g = kl_and_gradient(P * scale, Y)
        if not np.isfinite(g).all():
            raise FloatingPointError(f"t-SNE gradient became non-finite at iteration {it}")
        alpha = early if it < switch else late
        Y, prev = Y - learning_rate * g + alpha * (Y - prev), Y
        Y = Y - Y.mean(axis=0)
        kl = kl_divergence(P, Y)
        if kl < best_kl:
            best, best_kl, best_it = Y.copy(), kl, it
    log.debug("t-SNE best KL %.6g at iteration %d (initial %.6g)", best_kl, best_it, kl0)
    return EmbeddingLayout(best, labels, source, best_kl, kl0, best_it)
