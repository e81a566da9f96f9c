from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..autodiff.io import load_tensor, save_tensor

RANGE_TOL = 1e-9


@dataclass
class Dataset:
    """Labeled N x C x 64 x 64 images in [-1, 1]."""

    images: np.ndarray
    labels: np.ndarray
    class_names: list
    split_tag: str = "train"
    provenance: str = ""
    synthetic: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.images = np.asarray(self.images, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if self.synthetic is None:
            self.synthetic = np.zeros(len(self.labels), dtype=bool)
        self.synthetic = np.asarray(self.synthetic, dtype=bool)
        self.validate()

    def validate(self) -> None:
        if self.images.ndim != 4:
            raise ValueError(f"images must be N x C x H x W, got {self.images.shape}")
        if len(self.images) != len(self.labels) or len(self.labels) != len(self.synthetic):
            raise ValueError("images, labels and provenance flags differ in length")
        if self.images.size:
            lo, hi = self.images.min(), self.images.max()
            if lo < -1 - RANGE_TOL or hi > 1 + RANGE_TOL:
                raise ValueError(f"pixel range [{lo}, {hi}] exceeds [-1, 1]")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= len(self.class_names)):
            raise ValueError("labels must index class_names")

    def __len__(self):
        return len(self.labels)

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    @property
    def channels(self) -> int:
        return self.images.shape[1]

    def subset(self, idx, split_tag: str | None = None) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(
            self.images[idx],
            self.labels[idx],
            list(self.class_names),
            split_tag or self.split_tag,
            self.provenance,
            self.synthetic[idx],
            dict(self.meta),
        )

    def of_class(self, label: int) -> "Dataset":
        return self.subset(np.flatnonzero(self.labels == label))

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes)

    def manifest(self) -> dict:
        return {
            "n": len(self),
            "shape": list(self.images.shape[1:]),
            "class_names": list(self.class_names),
            "class_counts": self.class_counts().tolist(),
            "split_tag": self.split_tag,
            "provenance": self.provenance,
            "n_synthetic": int(self.synthetic.sum()),
            "value_range": [float(self.images.min()), float(self.images.max())] if len(self) else None,
            "meta": self.meta,
        }


def concat(a: Dataset, b: Dataset) -> Dataset:
    if list(a.class_names) != list(b.class_names):
        raise ValueError("datasets have different label spaces")
    return Dataset(
        np.concatenate([a.images, b.images]),
        np.concatenate([a.labels, b.labels]),
        list(a.class_names),
        a.split_tag,
        a.provenance,
        np.concatenate([a.synthetic, b.synthetic]),
        dict(a.meta),
    )


def save_cache(ds: Dataset, root) -> Path:
    """Write ``images.gft``, ``labels.gft``, ``synthetic.gft`` and ``manifest.json``."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    save_tensor(root / "images.gft", ds.images)
    save_tensor(root / "labels.gft", ds.labels.astype(np.float64))
    save_tensor(root / "synthetic.gft", ds.synthetic.astype(np.float64))
    (root / "manifest.json").write_text(json.dumps(ds.manifest(), indent=2, sort_keys=True) + "\n")
    return root


def load_cache(root) -> Dataset:
    root = Path(root)
    manifest_path = root / "manifest.json"
    if not manifest_path.exists():
        raise FileNotFoundError(f"no dataset cache at {root}")
    manifest = json.loads(manifest_path.read_text())
    images = load_tensor(root / "images.gft")
    labels = load_tensor(root / "labels.gft").astype(np.int64)
    synthetic = None
    if (root / "synthetic.gft").exists():
        synthetic = load_tensor(root / "synthetic.gft").astype(bool)
    return Dataset(
        images,
        labels,
        manifest["class_names"],
        manifest.get("split_tag", "train"),
        manifest.get("provenance", ""),
        synthetic,
        manifest.get("meta", {}),
    )
