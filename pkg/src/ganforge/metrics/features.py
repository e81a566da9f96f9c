"""Pluggable feature extractors for the distribution metrics.

``raw-pixels`` flattens images, ``rp:<D>[:<seed>]`` applies a fixed seeded
Gaussian projection to D dimensions, and ``classifier-features`` takes the
penultimate activations of a trained downstream classifier.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..nn.networks import Network, predict


class ExtractorNotReady(RuntimeError):
    """The requested extractor needs a trained model that was not supplied."""


@dataclass
class FeatureSet:
    features: np.ndarray
    extractor_id: str
    source: str = "real"

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.features.ndim != 2:
            raise ValueError("features must be an N x D matrix")
        if not np.isfinite(self.features).all():
            raise ValueError("features contain non-finite values")
        if self.source not in ("real", "synthetic"):
            raise ValueError("source must be 'real' or 'synthetic'")

    def __len__(self):
        return len(self.features)


def parse_extractor(spec: str) -> tuple[str, dict]:
    spec = spec.strip()
    if spec in ("raw-pixels", "raw"):
        return "raw-pixels", {}
    if spec in ("classifier-features", "classifier"):
        return "classifier-features", {}
    if spec.startswith("rp:") or spec.startswith("random-projection"):
        parts = spec.split(":")
        dim = int(parts[1]) if len(parts) > 1 else 64
        seed = int(parts[2]) if len(parts) > 2 else 0
        return "random-projection", {"dim": dim, "seed": seed}
    raise ValueError(f"unknown extractor {spec!r}")


def projection_matrix(in_dim: int, dim: int, seed: int = 0) -> np.ndarray:
    return np.random.default_rng(seed).standard_normal((in_dim, dim)) / np.sqrt(in_dim)


def extract_features(images, extractor: str = "raw-pixels", classifier: Network | None = None, source="real") -> FeatureSet:
    imgs = np.asarray(images, dtype=np.float64)
    if imgs.size and (imgs.min() < -1 - 1e-9 or imgs.max() > 1 + 1e-9):
        raise ValueError("images must lie in [-1, 1]")
    kind, opts = parse_extractor(extractor)
    flat = imgs.reshape(len(imgs), -1)
    if kind == "raw-pixels":
        return FeatureSet(flat, "raw-pixels", source)
    if kind == "random-projection":
        mat = projection_matrix(flat.shape[1], opts["dim"], opts["seed"])
        return FeatureSet(flat @ mat, f"rp:{opts['dim']}:{opts['seed']}", source)
    if classifier is None or not getattr(classifier, "trained", False):
        raise ExtractorNotReady("classifier-features needs a trained downstream classifier")
    feats = predict(classifier, imgs, features=True)
    return FeatureSet(feats, f"classifier-features:{feats.shape[1]}", source)
