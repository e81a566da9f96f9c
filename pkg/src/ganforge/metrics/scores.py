"""Inception Score, Fréchet distance, kernel distance, and k-NN precision/recall."""

from __future__ import annotations

import math

import numpy as np

from .features import FeatureSet

EIG_CLIP = 1e-10


def _matrix(x) -> np.ndarray:
    arr = np.asarray(getattr(x, "features", x), dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if not np.isfinite(arr).all():
        raise ValueError("features contain non-finite values")
    return arr


def inception_score(probs, n_splits: int = 10) -> tuple[float, float]:
    """``exp(mean KL(p(y|x) || p(y)))`` per split; returns (mean, std) over splits."""
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim != 2:
        raise ValueError("probs must be an N x C matrix")
    if (p < 0).any():
        raise ValueError("probabilities must be nonnegative")
    sums = p.sum(axis=1)
    if np.any(np.abs(sums - 1.0) > 1e-6):
        bad = int(np.argmax(np.abs(sums - 1.0)))
        raise ValueError(f"row {bad} sums to {sums[bad]}, not 1")
    n = len(p)
    n_splits = min(n_splits, n)
    if n_splits < 1:
        raise ValueError("need at least one row")
    scores = []
    for part in np.array_split(p, n_splits):
        # correctly rounded column sums keep identical rows exactly equal to their marginal
        marginal = np.array([math.fsum(col) for col in part.T]) / len(part)
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(part > 0, part * (np.log(part) - np.log(marginal)), 0.0)
        kl = np.maximum(terms.sum(axis=1), 0.0)  # Gibbs: each row KL is >= 0
        scores.append(np.exp(kl.mean()))
    return float(np.mean(scores)), float(np.std(scores))


def gaussian_stats(x) -> tuple[np.ndarray, np.ndarray]:
    x = _matrix(x)
    if len(x) < 2:
        raise ValueError("need at least 2 samples for a covariance")
    return x.mean(axis=0), np.atleast_2d(np.cov(x, rowvar=False, ddof=1))


def _psd_sqrt(a: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh((a + a.T) / 2)
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


def frechet_from_stats(mu1, sigma1, mu2, sigma2) -> float:
    """``||mu1 - mu2||^2 + Tr(S1 + S2 - 2 (S1 S2)^(1/2))``, clamped at 0.

    The trace of the product root is taken as ``Tr((S1^½ S2 S1^½)^½)``, whose
    argument is symmetric PSD; eigenvalues below 1e-10 are clipped to zero.
    """
    diff = mu1 - mu2
    root1 = _psd_sqrt(sigma1)
    inner = root1 @ sigma2 @ root1
    vals = np.linalg.eigvalsh((inner + inner.T) / 2)
    vals = np.where(vals < EIG_CLIP, 0.0, vals)
    tr_cross = np.sqrt(vals).sum()
    value = diff @ diff + np.trace(sigma1) + np.trace(sigma2) - 2.0 * tr_cross
    return float(max(value, 0.0))


def frechet_from_samples(r: np.ndarray, f: np.ndarray) -> float:
    """Same value as :func:`frechet_from_stats`, computed without D x D matrices.

    The nonzero eigenvalues of ``S1 S2`` are the squared singular values of
    ``R F^T / sqrt((n1-1)(n2-1))`` for centred samples ``R``, ``F``, so the
    cross trace needs only an n1 x n2 matrix. Used when D exceeds n1 + n2.
    """
    if len(r) < 2 or len(f) < 2:
        raise ValueError("need at least 2 samples for a covariance")
    rc, fc = r - r.mean(axis=0), f - f.mean(axis=0)
    scale = np.sqrt((len(r) - 1) * (len(f) - 1))
    sv2 = np.linalg.svd(rc @ fc.T / scale, compute_uv=False) ** 2
    sv2 = np.where(sv2 < EIG_CLIP, 0.0, sv2)
    diff = r.mean(axis=0) - f.mean(axis=0)
    tr1 = (rc * rc).sum() / (len(r) - 1)
    tr2 = (fc * fc).sum() / (len(f) - 1)
    return float(max(diff @ diff + tr1 + tr2 - 2.0 * np.sqrt(sv2).sum(), 0.0))


def fid(real, fake) -> float:
    r, f = _matrix(real), _matrix(fake)
    if r.shape[1] != f.shape[1]:
        raise ValueError(f"feature dimensions differ: {r.shape[1]} vs {f.shape[1]}")
    if r.shape[1] > len(r) + len(f):
        return frechet_from_samples(r, f)
    return frechet_from_stats(*gaussian_stats(r), *gaussian_stats(f))


def polynomial_kernel(x, y, degree: int = 3) -> np.ndarray:
    d = x.shape[1]
    return (x @ y.T / d + 1.0) ** degree


def mmd2_unbiased(x, y, degree: int = 3) -> float:
    m, n = len(x), len(y)
    kxx = polynomial_kernel(x, x, degree)
    kyy = polynomial_kernel(y, y, degree)
    kxy = polynomial_kernel(x, y, degree)
    sxx = (kxx.sum() - np.trace(kxx)) / (m * (m - 1))
    syy = (kyy.sum() - np.trace(kyy)) / (n * (n - 1))
    return float(sxx + syy - 2.0 * kxy.mean())


def kid(real, fake, subset_size: int = 50, n_subsets: int = 100, seed=0) -> tuple[float, float]:
    """Unbiased squared MMD with a cubic polynomial kernel, averaged over subsets."""
    r, f = _matrix(real), _matrix(fake)
    if r.shape[1] != f.shape[1]:
        raise ValueError(f"feature dimensions differ: {r.shape[1]} vs {f.shape[1]}")
    if subset_size < 2:
        raise ValueError("subset_size must be >= 2")
    if subset_size > len(r) or subset_size > len(f):
        raise ValueError(f"subset_size {subset_size} exceeds sample counts ({len(r)}, {len(f)})")
    rng = np.random.default_rng(seed)
    vals = np.empty(n_subsets)
    for i in range(n_subsets):
        ri = rng.choice(len(r), subset_size, replace=False)
        fi = rng.choice(len(f), subset_size, replace=False)
        vals[i] = mmd2_unbiased(r[ri], f[fi])
    return float(vals.mean()), float(vals.std())


def pairwise_distances(a: np.ndarray, b: np.ndarray, chunk: int = 256) -> np.ndarray:
    """Euclidean distances from explicit differences (no norm expansion)."""
    out = np.empty((len(a), len(b)))
    for i in range(0, len(a), chunk):
        diff = a[i : i + chunk, None, :] - b[None, :, :]
        out[i : i + chunk] = np.sqrt((diff * diff).sum(axis=-1))
    return out


def knn_radii(x: np.ndarray, k: int) -> np.ndarray:
    """Distance from each point to its k-th nearest other point."""
    d = pairwise_distances(x, x)
    np.fill_diagonal(d, np.inf)
    return np.partition(d, k - 1, axis=1)[:, k - 1]


def precision_recall(real, fake, k: int = 3) -> tuple[float, float]:
    """k-NN manifold precision (fake inside real balls) and recall (real inside fake balls)."""
    r, f = _matrix(real), _matrix(fake)
    if k < 1 or k >= min(len(r), len(f)):
        raise ValueError(f"k must satisfy 1 <= k < min(N_real, N_fake), got k={k}")
    r_radii = knn_radii(r, k)
    f_radii = knn_radii(f, k)
    d = pairwise_distances(r, f)
    precision = (d <= r_radii[:, None]).any(axis=0).mean()
    recall = (d <= f_radii[None, :]).any(axis=1).mean()
    return float(precision), float(recall)


def as_featureset(x, extractor_id="raw", source="real") -> FeatureSet:
    return x if isinstance(x, FeatureSet) else FeatureSet(_matrix(x), extractor_id, source)
