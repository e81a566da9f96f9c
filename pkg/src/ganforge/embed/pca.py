from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class PCAResult:
    projection: np.ndarray
    components: np.ndarray  # out_dims x D, rows are unit directions
    explained_variance_ratio: np.ndarray
    mean: np.ndarray

    def transform(self, x) -> np.ndarray:
        return (np.asarray(x, dtype=np.float64) - self.mean) @ self.components.T

    def inverse_transform(self, y) -> np.ndarray:
        return np.asarray(y) @ self.components + self.mean


def _fix_signs(vecs: np.ndarray) -> np.ndarray:
    """Flip each row so its largest-magnitude entry is positive."""
    pivot = vecs[np.arange(len(vecs)), np.argmax(np.abs(vecs), axis=1)]
    return vecs * np.where(pivot < 0, -1.0, 1.0)[:, None]


def pca(x, out_dims: int = 2) -> PCAResult:
    """Project centred data onto the top principal directions.

    The directions come from a thin SVD of the centred matrix, which gives
    the covariance eigenvectors without forming a D x D matrix.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("pca expects an N x D matrix")
    n, d = x.shape
    if n < 2:
        raise ValueError("pca needs at least 2 points")
    if not 1 <= out_dims <= min(n - 1, d):
        raise ValueError(f"out_dims must lie in [1, min(N-1, D)] = [1, {min(n - 1, d)}], got {out_dims}")
    mean = x.mean(axis=0)
    centred = x - mean
    _, s, vt = np.linalg.svd(centred, full_matrices=False)
    var = s**2
    total = var.sum()
    ratios = var[:out_dims] / total if total > 0 else np.zeros(out_dims)
    comps = _fix_signs(vt[:out_dims])
    return PCAResult(centred @ comps.T, comps, ratios, mean)
