"""Stabilizer on/off grid: train each loss mode per seed and compare FID."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .metrics.features import extract_features
from .metrics.scores import fid, precision_recall
from .nn.gan import LOSS_MODES, TrainConfig, generate, train

BASELINE = "vanilla"


@dataclass
class AblationRow:
    mode: str
    seed: int
    fid_first: float
    fid: float
    precision: float
    recall: float


@dataclass
class AblationTable:
    rows: list = field(default_factory=list)
    extractor: str = ""

    def mean_fid(self) -> dict[str, tuple[float, float]]:
        out = {}
        for mode in dict.fromkeys(r.mode for r in self.rows):
            vals = np.array([r.fid for r in self.rows if r.mode == mode])
            out[mode] = (float(vals.mean()), float(vals.std(ddof=1)) if len(vals) > 1 else 0.0)
        return out

    def relative_deltas(self, baseline: str = BASELINE) -> dict[str, float]:
        """Percent change of mean FID against the baseline mode (negative is better)."""
        means = self.mean_fid()
        if baseline not in means:
            return {}
        base = means[baseline][0]
        return {m: 100.0 * (v - base) / base if base > 0 else math.nan for m, (v, _) in means.items() if m != baseline}

    def statements(self, baseline: str = BASELINE) -> list[str]:
        lines = []
        for mode, pct in self.relative_deltas(baseline).items():
            verb = "reduced" if pct < 0 else "increased"
            lines.append(f"{mode} {verb} FID by {abs(pct):.2f}% relative to {baseline}")
        return lines

    def to_csv(self, path) -> None:
        cols = list(AblationRow.__dataclass_fields__)
        with open(path, "w") as fh:
            fh.write(",".join(cols) + "\n")
            for r in self.rows:
                fh.write(",".join(f"{v:.12g}" if isinstance(v, float) else str(v) for v in asdict(r).values()) + "\n")

    def to_markdown(self, baseline: str = BASELINE) -> str:
        deltas = self.relative_deltas(baseline)
        lines = [
            f"FID under {self.extractor} features, mean ± std over seeds.",
            "",
            "| mode | fid | relative to " + baseline + " |",
            "|---|---|---|",
        ]
        for mode, (m, s) in self.mean_fid().items():
            rel = "baseline" if mode == baseline else f"{deltas.get(mode, math.nan):+.2f}%"
            lines.append(f"| {mode} | {m:.4f} ± {s:.4f} | {rel} |")
        lines.append("")
        lines += [f"- {s}" for s in self.statements(baseline)]
        return "\n".join(lines) + "\n"


def run_ablation(
    data,
    config: TrainConfig,
    modes=LOSS_MODES,
    seeds=(0,),
    extractor: str = "rp:64",
    n_samples: int | None = None,
    sample_seed: int = 12345,
    on_run=None,
) -> AblationTable:
    """FID after the first and the last epoch for every mode x seed."""
    images = data.images if hasattr(data, "images") else np.asarray(data)
    real = extract_features(images, extractor)
    n = n_samples or len(images)
    k = min(3, min(n, len(images)) - 1)
    table = AblationTable(extractor=real.extractor_id)
    for mode in modes:
        for seed in seeds:
            first = {}

            def on_epoch(epoch, res):
                if epoch == 1:
                    fake = extract_features(generate(res.generator, n, sample_seed), extractor, source="synthetic")
                    first["fid"] = fid(real, fake)

            cfg = replace(config, loss_mode=mode, seed=int(seed))
            res = train(cfg, data, on_epoch=on_epoch)
            fake = extract_features(generate(res.generator, n, sample_seed), extractor, source="synthetic")
            p, r = precision_recall(real, fake, k)
            table.rows.append(AblationRow(mode, int(seed), first["fid"], fid(real, fake), p, r))
            if on_run is not None:
                on_run(table.rows[-1], res)
    return table
