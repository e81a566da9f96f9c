from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import Dataset


@dataclass(frozen=True)
class SplitSpec:
    fractions: tuple = (0.8, 0.1, 0.1)
    seed: int = 0
    stratified: bool = True

    def __post_init__(self):
        if len(self.fractions) != 3:
            raise ValueError("fractions must be (train, val, test)")
        if any(f < 0 for f in self.fractions):
            raise ValueError("fractions must be nonnegative")
        if abs(sum(self.fractions) - 1.0) > 1e-9:
            raise ValueError(f"fractions sum to {sum(self.fractions)}, not 1")


def largest_remainder(n: int, fractions) -> list[int]:
    """Integer sizes summing to ``n``, ties broken toward the earlier split."""
    quotas = [n * f for f in fractions]
    sizes = [int(np.floor(q)) for q in quotas]
    rest = n - sum(sizes)
    order = sorted(range(len(quotas)), key=lambda i: (-(quotas[i] - sizes[i]), i))
    for i in order[:rest]:
        sizes[i] += 1
    return sizes


def split_indices(labels: np.ndarray, spec: SplitSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    labels = np.asarray(labels)
    rng = np.random.default_rng(spec.seed)
    n_active = sum(1 for f in spec.fractions if f > 0)
    if n_active == 3 and len(labels) < 3:
        raise ValueError("need at least 3 samples for a three-way split")
    parts = [[], [], []]
    groups = [np.arange(len(labels))]
    if spec.stratified:
        groups = [np.flatnonzero(labels == c) for c in np.unique(labels)]
        for c, g in zip(np.unique(labels), groups):
            if len(g) < n_active:
                raise ValueError(
                    f"cannot stratify: class {c} has {len(g)} samples for {n_active} nonempty splits"
                )
    for g in groups:
        perm = g[rng.permutation(len(g))]
        sizes = largest_remainder(len(g), spec.fractions)
        start = 0
        for k, size in enumerate(sizes):
            parts[k].append(perm[start : start + size])
            start += size
    return tuple(np.sort(np.concatenate(p)).astype(np.int64) for p in parts)


def split(data: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset, Dataset]:
    idx = split_indices(data.labels, spec)
    return tuple(data.subset(i, tag) for i, tag in zip(idx, ("train", "val", "test")))
