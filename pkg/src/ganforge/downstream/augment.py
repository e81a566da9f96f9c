"""Seeded augmentation policies on N x C x H x W batches in [-1, 1].

Every policy returns ``(images, soft_labels)``. Flip, rotate, contrast,
cutout and augmix keep the one-hot labels; mixup and cutmix return convex
pairs of them.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

KINDS = ("none", "flip", "rotate", "contrast", "mixup", "cutout", "cutmix", "augmix", "compose")

DEFAULTS = {
    "rotate": {"max_deg": 15.0},
    "contrast": {"low": 0.8, "high": 1.2},
    "mixup": {"alpha": 0.2},
    "cutout": {"size": 16},
    "cutmix": {"alpha": 1.0},
    "augmix": {"width": 3, "depth": 2, "alpha": 1.0},
}

FILL = -1.0


@dataclass
class AugPolicy:
    kind: str = "none"
    params: dict = field(default_factory=dict)
    seed: int = 0
    children: list = field(default_factory=list)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown augmentation {self.kind!r}; expected one of {KINDS}")
        self.params = {**DEFAULTS.get(self.kind, {}), **self.params}
        p = self.params
        if self.kind == "rotate" and not 0 <= p["max_deg"] <= 180:
            raise ValueError("rotate max_deg must lie in [0, 180]")
        if self.kind == "contrast" and not 0 < p["low"] <= p["high"]:
            raise ValueError("contrast range must satisfy 0 < low <= high")
        if self.kind in ("mixup", "cutmix", "augmix") and p["alpha"] <= 0:
            raise ValueError(f"{self.kind} alpha must be positive")
        if self.kind == "cutout" and int(p["size"]) < 1:
            raise ValueError("cutout size must be >= 1")
        if self.kind == "augmix" and (int(p["width"]) < 1 or int(p["depth"]) < 1):
            raise ValueError("augmix width and depth must be >= 1")
        if self.kind == "compose" and not self.children:
            raise ValueError("compose needs at least one policy")

    @classmethod
    def classical(cls, seed: int = 0) -> "AugPolicy":
        """Flip, rotation up to 15 degrees, contrast 0.8 to 1.2."""
        return cls("compose", seed=seed, children=[cls("flip"), cls("rotate"), cls("contrast")])

    @classmethod
    def parse(cls, text: str, seed: int = 0) -> "AugPolicy":
        """``"flip+rotate:10+contrast:0.7:1.3"`` style specs; ``classical`` for the default mix."""
        text = text.strip()
        if text == "classical":
            return cls.classical(seed)
        parts = [p for p in text.split("+") if p]
        if len(parts) > 1:
            return cls("compose", seed=seed, children=[cls.parse(p) for p in parts])
        name, *args = parts[0].split(":")
        keys = {
            "rotate": ["max_deg"], "contrast": ["low", "high"], "mixup": ["alpha"],
            "cutout": ["size"], "cutmix": ["alpha"], "augmix": ["width", "depth", "alpha"],
        }.get(name, [])
        if len(args) > len(keys):
            raise ValueError(f"too many arguments for {name!r}")
        return cls(name, {k: float(v) for k, v in zip(keys, args)}, seed)

    def describe(self) -> str:
        if self.kind == "compose":
            return "+".join(c.describe() for c in self.children)
        args = ":".join(f"{v:g}" for v in self.params.values())
        return f"{self.kind}:{args}" if args else self.kind


def one_hot(labels, n_classes: int) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.ndim == 2:
        return labels.astype(np.float64)
    return np.eye(n_classes)[labels.astype(np.int64)]


def _flip(x, rng):
    out = x.copy()
    sel = rng.random(len(x)) < 0.5
    out[sel] = out[sel][..., ::-1]
    return out


def _rotate(x, rng, max_deg):
    angles = rng.uniform(-max_deg, max_deg, len(x))
    out = np.empty_like(x)
    for i, a in enumerate(angles):
        out[i] = ndimage.rotate(x[i], a, axes=(2, 1), reshape=False, order=1, mode="constant", cval=FILL)
    return np.clip(out, -1.0, 1.0)


def _contrast(x, rng, low, high):
    c = rng.uniform(low, high, len(x))[:, None, None, None]
    mean = x.mean(axis=(1, 2, 3), keepdims=True)
    return np.clip(mean + c * (x - mean), -1.0, 1.0)


def _cutout(x, rng, size):
    n, _, h, w = x.shape
    s = int(min(size, h, w))
    out = x.copy()
    tops = rng.integers(0, h - s + 1, n)
    lefts = rng.integers(0, w - s + 1, n)
    for i in range(n):
        out[i, :, tops[i] : tops[i] + s, lefts[i] : lefts[i] + s] = FILL
    return out


def _mixup(x, y, rng, alpha):
    lam = rng.beta(alpha, alpha, len(x))
    partner = rng.permutation(len(x))
    lx = lam[:, None, None, None]
    return lx * x + (1 - lx) * x[partner], lam[:, None] * y + (1 - lam[:, None]) * y[partner]


def _cutmix(x, y, rng, alpha):
    n, _, h, w = x.shape
    lam = rng.beta(alpha, alpha, n)
    partner = rng.permutation(n)
    out = x.copy()
    weights = np.empty(n)
    for i in range(n):
        bh = int(round(h * np.sqrt(1 - lam[i])))
        bw = int(round(w * np.sqrt(1 - lam[i])))
        top = rng.integers(0, h - bh + 1)
        left = rng.integers(0, w - bw + 1)
        out[i, :, top : top + bh, left : left + bw] = x[partner[i], :, top : top + bh, left : left + bw]
        weights[i] = 1.0 - bh * bw / (h * w)
    return out, weights[:, None] * y + (1 - weights[:, None]) * y[partner]


def _shift(x, rng, max_px=4):
    out = np.full_like(x, FILL)
    dy, dx = rng.integers(-max_px, max_px + 1, 2)
    h, w = x.shape[-2:]
    out[..., max(dy, 0) : h + min(dy, 0), max(dx, 0) : w + min(dx, 0)] = x[
        ..., max(-dy, 0) : h - max(dy, 0), max(-dx, 0) : w - max(dx, 0)
    ]
    return out


_AUGMIX_OPS = (
    lambda x, rng: _flip(x, rng),
    lambda x, rng: _rotate(x, rng, 15.0),
    lambda x, rng: _contrast(x, rng, 0.6, 1.4),
    lambda x, rng: _shift(x, rng),
)


def _augmix(x, rng, width, depth, alpha):
    out = np.empty_like(x)
    for i in range(len(x)):
        img = x[i : i + 1]
        weights = rng.dirichlet([alpha] * int(width))
        mixed = np.zeros_like(img)
        for wgt in weights:
            chain = img
            for _ in range(int(depth)):
                chain = _AUGMIX_OPS[rng.integers(len(_AUGMIX_OPS))](chain, rng)
            mixed += wgt * chain
        m = rng.beta(alpha, alpha)
        out[i] = (m * img + (1 - m) * mixed)[0]
    return np.clip(out, -1.0, 1.0)


def apply_policy(images, labels, policy: AugPolicy, n_classes: int | None = None, rng=None):
    """Augment a batch; returns ``(images, soft_labels)``.

    ``rng`` defaults to a generator seeded from ``policy.seed``; pass one
    explicitly to draw fresh augmentations each epoch.
    """
    x = np.asarray(images, dtype=np.float64)
    if len(x) == 0:
        raise ValueError("cannot augment an empty batch")
    if n_classes is None:
        n_classes = int(np.max(labels)) + 1 if np.asarray(labels).ndim == 1 else np.asarray(labels).shape[1]
    y = one_hot(labels, n_classes)
    rng = np.random.default_rng(policy.seed) if rng is None else rng
    p = policy.params
    kind = policy.kind
    if kind == "none":
        return x.copy(), y
    if kind == "flip":
        return _flip(x, rng), y
    if kind == "rotate":
        return _rotate(x, rng, p["max_deg"]), y
    if kind == "contrast":
        return _contrast(x, rng, p["low"], p["high"]), y
    if kind == "cutout":
        return _cutout(x, rng, p["size"]), y
    if kind == "mixup":
        return _mixup(x, y, rng, p["alpha"])
    if kind == "cutmix":
        return _cutmix(x, y, rng, p["alpha"])
    if kind == "augmix":
        return _augmix(x, rng, p["width"], p["depth"], p["alpha"]), y
    for child in policy.children:
        x, y = apply_policy(x, y, child, n_classes, rng)
    return x, y
