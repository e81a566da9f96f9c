from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from ..autodiff.functional import softmax
from ..nn.gan import generate
from ..nn.networks import Network, predict
from .features import FeatureSet, extract_features
from .scores import fid, inception_score, kid, precision_recall


@dataclass
class MetricReport:
    is_mean: float
    is_std: float
    fid: float
    kid_mean: float
    kid_std: float
    precision: float
    recall: float
    extractor_id: str
    n_real: int
    n_fake: int

    def __post_init__(self):
        if self.is_mean < 1 - 1e-9:
            raise ValueError(f"Inception Score below 1: {self.is_mean}")
        if self.fid < -1e-9:
            raise ValueError(f"negative FID {self.fid}")
        for name in ("precision", "recall"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} {v} outside [0, 1]")

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def to_csv(self, path) -> None:
        names = [f.name for f in fields(self)]
        values = [getattr(self, n) for n in names]
        with open(path, "w") as fh:
            fh.write(",".join(names) + "\n")
            fh.write(",".join(f"{v:.12g}" if isinstance(v, float) else str(v) for v in values) + "\n")

    @classmethod
    def from_json(cls, path) -> "MetricReport":
        with open(path) as fh:
            return cls(**json.load(fh))

    def summary(self) -> str:
        return (
            f"IS {self.is_mean:.4f}±{self.is_std:.4f}  FID {self.fid:.4f}  "
            f"KID {self.kid_mean:.5f}±{self.kid_std:.5f}  P {self.precision:.3f}  R {self.recall:.3f}  "
            f"[{self.extractor_id}, real={self.n_real}, fake={self.n_fake}]"
        )


def centroid_probs(real: FeatureSet, labels, fake: FeatureSet) -> np.ndarray:
    """Class posteriors from a softmax over negative squared centroid distances.

    Stands in for a classifier head when the extractor has none; the
    temperature is the mean squared distance of real points to their own
    class centroid.
    """
    labels = np.asarray(labels)
    classes = np.unique(labels)
    cents = np.stack([real.features[labels == c].mean(axis=0) for c in classes])
    own = ((real.features - cents[np.searchsorted(classes, labels)]) ** 2).sum(axis=1)
    temp = max(own.mean(), 1e-12)
    d2 = ((fake.features[:, None, :] - cents[None]) ** 2).sum(axis=-1)
    return softmax(-d2 / temp)


def evaluate(
    real_images,
    fake_images,
    extractor: str = "rp:64",
    classifier: Network | None = None,
    real_labels=None,
    kid_subset: int = 50,
    kid_subsets: int = 100,
    pr_k: int = 3,
    is_splits: int = 10,
    seed=0,
) -> MetricReport:
    """Score a fake batch against real images under one extractor."""
    real = extract_features(real_images, extractor, classifier, "real")
    fake = extract_features(fake_images, extractor, classifier, "synthetic")
    if classifier is not None and getattr(classifier, "trained", False):
        probs = softmax(predict(classifier, np.asarray(fake_images)))
    elif real_labels is not None and len(np.unique(real_labels)) > 1:
        probs = centroid_probs(real, real_labels, fake)
    else:
        probs = np.ones((len(fake), 1))
    is_mean, is_std = inception_score(probs, is_splits)
    subset = min(kid_subset, len(real), len(fake))
    kid_mean, kid_std = kid(real, fake, subset, kid_subsets, seed)
    k = min(pr_k, min(len(real), len(fake)) - 1)
    precision, recall = precision_recall(real, fake, k)
    return MetricReport(
        is_mean, is_std, fid(real, fake), kid_mean, kid_std, precision, recall,
        real.extractor_id, len(real), len(fake),
    )


class ModeError(ValueError):
    pass


def real_fake_curve(snapshots, real_images, n: int = 64, seed=0, generator=None, discriminator=None):
    """Mean D(real) and mean D(fake) per snapshot.

    ``snapshots`` yields ``(epoch, generator, discriminator)`` triples of
    networks, or :class:`~ganforge.nn.gan.Snapshot` objects when template
    ``generator``/``discriminator`` networks are passed to load them into.
    Returns rows ``(epoch, d_real_mean, d_fake_mean)``.
    """
    rows = []
    real = np.asarray(real_images)[:n]
    for snap in snapshots:
        if isinstance(snap, tuple):
            epoch, gen, disc = snap
        else:
            epoch, gen, disc = snap.epoch, generator, discriminator
            gen.load_state_dict(snap.generator)
            disc.load_state_dict(snap.discriminator)
        if disc.arch.get("critic", False):
            raise ModeError("real/fake scores need a sigmoid discriminator, not a WGAN critic")
        fake = generate(gen, len(real), seed)
        d_real = predict(disc, real).mean()
        d_fake = predict(disc, fake).mean()
        rows.append((epoch, float(d_real), float(d_fake)))
    return rows


def write_curve_csv(rows, path) -> None:
    with open(path, "w") as fh:
        fh.write("epoch,d_real_mean,d_fake_mean\n")
        for epoch, r, f in rows:
            fh.write(f"{epoch},{r:.12g},{f:.12g}\n")


@dataclass
class GateResult:
    passed: bool
    retained: np.ndarray
    indices: np.ndarray
    threshold: float


def quality_gate(samples, report: MetricReport, fid_max: float = math.inf, precision_min: float = 0.0, scores=None) -> GateResult:
    """Pass iff ``fid <= fid_max`` and ``precision >= precision_min``.

    On a pass, keeps the samples whose discriminator score is at least the
    median score; on a fail nothing is retained.
    """
    if math.isnan(fid_max) or math.isnan(precision_min) or math.isinf(precision_min):
        raise ValueError("gate thresholds must be finite numbers (fid_max may be +inf)")
    samples = np.asarray(samples)
    passed = report.fid <= fid_max and report.precision >= precision_min
    if not passed:
        return GateResult(False, samples[:0], np.zeros(0, dtype=np.int64), math.nan)
    if scores is None:
        idx = np.arange(len(samples))
        return GateResult(True, samples, idx, math.nan)
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    med = float(np.median(scores))
    idx = np.flatnonzero(scores >= med)
    return GateResult(True, samples[idx], idx, med)
