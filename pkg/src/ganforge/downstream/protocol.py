"""Real-only vs classically augmented vs GAN-augmented classifier comparison."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..data.dataset import Dataset, concat
from ..metrics.report import MetricReport, quality_gate
from ..nn.gan import generate
from ..nn.networks import predict
from .augment import AugPolicy
from .classifier import ClassifierConfig, evaluate_classifier, train_classifier

REGIMENS = ("real", "classical", "gan")
COLUMNS = ("regimen", "accuracy", "macro_f1", "auroc", "sens_at_spec")


class MissingGenerator(RuntimeError):
    pass


@dataclass
class RegimenResult:
    regimen: str
    seed: int
    accuracy: float
    macro_f1: float
    auroc: float | None
    sens_at_spec: float | None
    n_train_real: int
    n_train_synth: int
    ratio: float | None = None
    filtered: bool = False
    best_epoch: int = 0
    reduction: str = ""

    def __post_init__(self):
        for name in ("accuracy", "macro_f1", "auroc", "sens_at_spec"):
            v = getattr(self, name)
            if v is not None and not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} {v} outside [0, 1]")

    @property
    def label(self) -> str:
        if self.regimen != "gan":
            return self.regimen
        return f"gan@{self.ratio:g}" + ("+filter" if self.filtered else "")


def mix_synthetic(real: Dataset, synth: Dataset, ratio: float, seed=0) -> Dataset:
    """Append ``floor(ratio * N_real)`` synthetic samples, balanced across classes.

    The count is split evenly over classes, remainders going to the lowest
    class ids. Samples are drawn without replacement.
    """
    if ratio < 0:
        raise ValueError("ratio must be >= 0")
    if list(real.class_names) != list(synth.class_names):
        raise ValueError("real and synthetic label spaces differ")
    total = int(math.floor(ratio * len(real) + 1e-9))
    if total == 0:
        return real
    k = real.n_classes
    per_class = [total // k + (1 if c < total % k else 0) for c in range(k)]
    have = synth.class_counts()
    short = {real.class_names[c]: int(per_class[c] - have[c]) for c in range(k) if have[c] < per_class[c]}
    if short:
        raise ValueError(f"synthetic pool too small; shortfall per class: {short}")
    rng = np.random.default_rng([int(seed), 3])
    idx = np.concatenate(
        [rng.choice(np.flatnonzero(synth.labels == c), per_class[c], replace=False) for c in range(k)]
    )
    picked = synth.subset(idx)
    picked.synthetic = np.ones(len(picked), dtype=bool)
    return concat(real, picked)


def synthetic_pool(
    generators: dict,
    n_per_class: int,
    class_names: list,
    seed=0,
    discriminators: dict | None = None,
    filtered: bool = False,
) -> Dataset:
    """Samples from one generator per class.

    With ``filtered`` twice as many samples are drawn and the quality gate
    keeps the ones its discriminator scores at or above the median.
    """
    images, labels = [], []
    for c in range(len(class_names)):
        if c not in generators:
            raise MissingGenerator(f"no generator for class {class_names[c]!r}")
        n = 2 * n_per_class if filtered else n_per_class
        batch = generate(generators[c], max(n, 1), seed=int(np.random.default_rng([int(seed), c]).integers(2**63)))
        if filtered:
            if not discriminators or c not in discriminators:
                raise MissingGenerator(f"filtering needs a discriminator for class {class_names[c]!r}")
            scores = predict(discriminators[c], batch).reshape(-1)
            open_gate = MetricReport(1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0, "gate", len(batch), len(batch))
            batch = quality_gate(batch, open_gate, scores=scores).retained
        images.append(batch[:n_per_class])
        labels.append(np.full(min(n_per_class, len(batch)), c))
    return Dataset(
        np.concatenate(images), np.concatenate(labels), list(class_names), "synthetic", "gan",
        np.ones(sum(map(len, labels)), dtype=bool),
    )


@dataclass
class ProtocolTable:
    rows: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def groups(self) -> dict[str, list]:
        out: dict[str, list] = {}
        for r in self.rows:
            out.setdefault(r.label, []).append(r)
        return out

    def summary(self) -> dict[str, dict]:
        """Mean and sample standard deviation per regimen label and metric."""
        out = {}
        for label, rows in self.groups().items():
            stats = {}
            for name in COLUMNS[1:]:
                vals = np.array([getattr(r, name) for r in rows if getattr(r, name) is not None], dtype=float)
                if len(vals):
                    stats[name] = (float(vals.mean()), float(vals.std(ddof=1)) if len(vals) > 1 else 0.0)
                else:
                    stats[name] = (math.nan, math.nan)
            out[label] = stats
        return out

    def to_csv(self, path) -> None:
        cols = ["regimen", "label", "seed", "ratio", "filtered", *COLUMNS[1:], "n_train_real", "n_train_synth",
                "best_epoch"]

        def fmt(v):
            if v is None:
                return ""
            if isinstance(v, float):
                return f"{v:.12g}"
            return str(v)

        with open(path, "w") as fh:
            fh.write(",".join(cols) + "\n")
            for r in self.rows:
                vals = [r.label if c == "label" else getattr(r, c) for c in cols]
                fh.write(",".join(fmt(v) for v in vals) + "\n")

    def to_markdown(self) -> str:
        lines = ["| " + " | ".join(COLUMNS) + " | seeds |", "|" + "---|" * (len(COLUMNS) + 1)]
        for label, stats in self.summary().items():
            cells = [label] + [
                "n/a" if math.isnan(m) else f"{m:.4f} ± {s:.4f}" for m, s in (stats[c] for c in COLUMNS[1:])
            ]
            lines.append("| " + " | ".join(cells) + f" | {len(self.groups()[label])} |")
        if self.meta.get("reduction"):
            lines.append("")
            lines.append(f"AUROC and sensitivity: {self.meta['reduction']}.")
        return "\n".join(lines) + "\n"

    def write_cells(self, root) -> None:
        root = Path(root)
        root.mkdir(parents=True, exist_ok=True)
        for r in self.rows:
            name = f"{r.label.replace('@', '_').replace('+', '_')}_seed{r.seed}.json"
            (root / name).write_text(json.dumps({**asdict(r), "meta": self.meta}, indent=2, sort_keys=True) + "\n")


def run_protocol(
    train: Dataset,
    val: Dataset | None,
    test: Dataset,
    generators: dict | None = None,
    regimens=REGIMENS,
    ratios=(0.25, 0.5, 1.0),
    filtered=(False,),
    seeds=range(5),
    classifier: ClassifierConfig | None = None,
    policy: AugPolicy | None = None,
    discriminators: dict | None = None,
    positive_class: int | None = None,
    specificity_target: float = 0.9,
) -> ProtocolTable:
    """Train and score one classifier per seed x regimen cell.

    The classifier seed equals the cell seed in every regimen, so a GAN cell
    at ratio 0 trains on exactly the real-only set with the same RNG streams
    and reproduces the real-only cell bit for bit.
    """
    unknown = set(regimens) - set(REGIMENS)
    if unknown:
        raise ValueError(f"unknown regimens {sorted(unknown)}")
    if "gan" in regimens and not generators:
        raise MissingGenerator("GAN regimen requested without generators")
    classifier = classifier or ClassifierConfig()
    policy = policy or AugPolicy.classical()
    table = ProtocolTable(meta={
        "classifier": classifier.to_dict(),
        "classical_policy": policy.describe(),
        "specificity_target": specificity_target,
        "ratios": list(ratios),
    })

    def cell(regimen, seed, data, aug, ratio=None, filt=False):
        cfg = ClassifierConfig(**{**asdict(classifier), "seed": int(seed)})
        run = train_classifier(data, val, aug, cfg)
        m = evaluate_classifier(run.network, test, positive_class, specificity_target)
        table.meta["reduction"] = m.reduction
        n_syn = int(data.synthetic.sum())
        table.rows.append(RegimenResult(
            regimen, int(seed), m.accuracy, m.macro_f1, m.auroc, m.sens_at_spec,
            len(data) - n_syn, n_syn, ratio, filt, run.best_epoch, m.reduction,
        ))

    for seed in seeds:
        if "real" in regimens:
            cell("real", seed, train, AugPolicy("none"))
        if "classical" in regimens:
            aug = AugPolicy(policy.kind, dict(policy.params), int(seed), list(policy.children))
            cell("classical", seed, train, aug)
        if "gan" in regimens:
            need = int(math.ceil(max(ratios, default=0) * len(train) / train.n_classes)) + 1
            for filt in filtered:
                pool = synthetic_pool(generators, need, train.class_names, seed, discriminators, filt)
                for ratio in ratios:
                    cell("gan", seed, mix_synthetic(train, pool, ratio, seed), AugPolicy("none"), ratio, filt)
    return table
