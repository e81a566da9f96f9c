"""``ganforge`` command line: dataset, train-gan, evaluate, embed, protocol, ablate.

Settings resolve as built-in defaults < TOML config file < explicit flags.
Keys in the config file are the long flag names with dashes replaced by
underscores, either at top level or under a table named after the command
(``[train-gan]``). The resolved settings are written to
``<out>/run_config.json`` before any other work.

Exit codes: 0 success, 2 config or validation error, 3 training aborted,
4 missing prerequisite, 5 quality gate never passed.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__

log = logging.getLogger("ganforge")

EXIT_CONFIG, EXIT_TRAIN, EXIT_MISSING, EXIT_GATE = 2, 3, 4, 5


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


# ---------------------------------------------------------------------------
# settings


COMMON = {"seed": None, "out": None, "config": None}

DEFAULTS = {
    "dataset": {
        "toy": None, "from_dir": None, "classes": 3, "per_class": 64, "noise": 0.5, "channels": None,
        "split": None, "stratified": True,
    },
    "train-gan": {
        "data": None, "epochs": 300, "batch": 32, "latent_dim": 100, "k": 1, "lr": 2e-4, "beta1": 0.5,
        "beta2": 0.999, "loss": "vanilla", "sn": False, "gp_lambda": 10.0, "gen_objective": "minimax",
        "d_batch": "joint", "width": 64, "power_iters": 1, "checkpoint_every": 0, "sample_every": 0,
        "n_samples": 16, "per_class": False, "class_index": None, "wallclock": False,
    },
    "evaluate": {
        "data": None, "checkpoint": None, "self_test": False, "extractor": ["rp:64"], "classifier": None,
        "n": None, "kid_subset": 50, "kid_subsets": 100, "k": 3, "is_splits": 10, "sample_seed": 12345,
    },
    "embed": {
        "data": None, "checkpoint": None, "method": "both", "features": "rp:64", "classifier": None,
        "n_real": None, "n_fake": None, "perp": 30.0, "iters": 1000, "eta": 200.0, "exaggeration": 12.0,
        "sample_seed": 12345,
    },
    "protocol": {
        "data": None, "split": [0.5, 0.25, 0.25], "train_per_class": None, "generators": None,
        "train_first": False, "regimens": ["real", "classical", "gan"], "ratios": [0.25, 0.5, 1.0],
        "filtered": "off", "seeds": 5, "clf_epochs": 50, "clf_batch": 32, "clf_lr": 1e-3,
        "clf_widths": [32, 64, 128], "policy": "classical", "positive_class": None, "spec_target": 0.9,
        "gan_epochs": 200, "gan_batch": 16, "gan_width": 8, "gan_lr": 2e-4, "loss": "vanilla", "sn": False,
        "gen_objective": "non_saturating", "gate_fid_max": math.inf, "gate_precision_min": 0.0,
        "gate_extractor": "rp:64", "max_rounds": 3, "round_epochs": 20, "save_classifiers": False,
    },
    "ablate": {
        "data": None, "epochs": 50, "batch": 16, "width": 8, "lr": 2e-4, "gen_objective": "non_saturating",
        "modes": ["vanilla", "wgan_gp", "vanilla+spectral_norm", "wgan_gp+spectral_norm"], "seeds": 1,
        "extractor": "rp:64", "n_samples": None, "gp_lambda": 10.0,
    },
}


def _load_toml(path) -> dict:
    try:
        import tomllib
    except ModuleNotFoundError:  # Python < 3.11
        import tomli as tomllib

    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError as exc:
        raise CliError(f"config file not found: {path}", EXIT_CONFIG) from exc
    except tomllib.TOMLDecodeError as exc:
        raise CliError(f"config file {path}: {exc}", EXIT_CONFIG) from exc


def resolve(command: str, args: argparse.Namespace) -> dict:
    defaults = {**COMMON, **DEFAULTS[command]}
    explicit = {k: v for k, v in vars(args).items() if k not in ("command", "func")}
    file_cfg: dict = {}
    if explicit.get("config"):
        raw = _load_toml(explicit["config"])
        file_cfg = {k.replace("-", "_"): v for k, v in raw.items() if not isinstance(v, dict)}
        file_cfg.update({k.replace("-", "_"): v for k, v in raw.get(command, {}).items()})
        unknown = sorted(set(file_cfg) - set(defaults))
        if unknown:
            raise CliError(f"unknown config keys for {command}: {unknown}", EXIT_CONFIG)
    merged = {**defaults, **file_cfg, **explicit}
    if merged["seed"] is None:
        env = os.environ.get("GANFORGE_SEED")
        try:
            merged["seed"] = int(env) if env not in (None, "") else 0
        except ValueError as exc:
            raise CliError(f"GANFORGE_SEED must be an integer, got {env!r}", EXIT_CONFIG) from exc
    merged["seed"] = int(merged["seed"])
    if merged["out"] is None:
        merged["out"] = str(Path("runs") / command)
    return merged


def _jsonable(v):
    if isinstance(v, float) and math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    return v


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


def start_run(command: str, cfg: dict) -> Path:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "run_config.json", {"command": command, "version": __version__, "settings": cfg})
    return out


def _load_data(path):
    from .data import load_cache

    if not path:
        raise CliError("--data is required", EXIT_CONFIG)
    try:
        return load_cache(path)
    except FileNotFoundError as exc:
        raise CliError(f"missing dataset cache: {exc}", EXIT_MISSING) from exc


def _load_ckpt(path):
    from .nn.checkpoint import load_checkpoint

    p = Path(path)
    if p.is_dir():
        p = p / "final.gfc"
    if not p.exists():
        raise CliError(f"missing checkpoint: {p}", EXIT_MISSING)
    return load_checkpoint(p)


def _load_classifier(path):
    from .nn.checkpoint import load_network

    if path is None:
        return None
    p = Path(path)
    if not p.exists():
        raise CliError(f"missing classifier: {p}", EXIT_MISSING)
    net, extra = load_network(p)
    net.trained = bool(extra.get("trained", False))
    return net


def _train_config(cfg: dict, **over):
    from .nn.gan import TrainConfig

    loss = cfg["loss"].replace("-", "_")
    if loss not in ("vanilla", "wgan_gp"):
        raise CliError(f"--loss must be vanilla or wgan-gp, got {cfg['loss']!r}", EXIT_CONFIG)
    mode = loss + ("+spectral_norm" if cfg["sn"] else "")
    fields = dict(
        epochs=cfg["epochs"], batch_size=cfg["batch"], latent_dim=cfg["latent_dim"], k_disc_steps=cfg["k"],
        lr=cfg["lr"], beta1=cfg["beta1"], beta2=cfg["beta2"], loss_mode=mode, gp_lambda=cfg["gp_lambda"],
        gen_objective=cfg["gen_objective"], d_batch=cfg["d_batch"], width=cfg["width"],
        n_power_iters=cfg["power_iters"], checkpoint_every=cfg["checkpoint_every"], seed=cfg["seed"],
        record_wallclock=cfg["wallclock"],
    )
    fields.update(over)
    return TrainConfig(**fields)


# ---------------------------------------------------------------------------
# dataset


def cmd_dataset(cfg: dict) -> int:
    from .data import SplitSpec, load_image_dir, save_cache, split, synth_glyphs, synth_lungfields

    if bool(cfg["toy"]) == bool(cfg["from_dir"]):
        raise CliError("give exactly one of --toy NAME or --from DIR", EXIT_CONFIG)
    out = start_run("dataset", cfg)
    if cfg["toy"] == "glyphs":
        ds = synth_glyphs(cfg["classes"], cfg["per_class"], cfg["noise"], cfg["seed"], cfg["channels"] or 3)
    elif cfg["toy"] == "lungfields":
        ds = synth_lungfields(cfg["per_class"], cfg["noise"], cfg["seed"], cfg["classes"] if cfg["classes"] != 3 else 2)
    elif cfg["toy"]:
        raise CliError(f"unknown toy dataset {cfg['toy']!r} (glyphs, lungfields)", EXIT_CONFIG)
    else:
        if not Path(cfg["from_dir"]).is_dir():
            raise CliError(f"no such image directory: {cfg['from_dir']}", EXIT_MISSING)
        ds = load_image_dir(cfg["from_dir"], cfg["channels"])
    save_cache(ds, out)
    if cfg["split"]:
        spec = SplitSpec(tuple(cfg["split"]), cfg["seed"], cfg["stratified"])
        for part in split(ds, spec):
            save_cache(part, out / part.split_tag)
    lo, hi = float(ds.images.min()), float(ds.images.max())
    print(f"dataset: N={len(ds)} classes={ds.class_names} counts={ds.class_counts().tolist()} "
          f"shape={list(ds.images.shape[1:])} range=[{lo:.4f}, {hi:.4f}] -> {out}")
    return 0


# ---------------------------------------------------------------------------
# train-gan


def _train_one(cfg: dict, data, out: Path, label: str = "", extra: dict | None = None) -> None:
    from . import plotting
    from .metrics.report import ModeError, real_fake_curve, write_curve_csv
    from .mosaic import save_mosaic
    from .nn.checkpoint import save_checkpoint
    from .nn.gan import TrainingAborted, generate, train

    tc = _train_config(cfg)
    (out / "checkpoints").mkdir(parents=True, exist_ok=True)
    (out / "samples").mkdir(exist_ok=True)
    every = cfg["sample_every"] or tc.checkpoint_every or tc.epochs
    written = set()

    def on_epoch(epoch, res):
        if epoch % every == 0 or epoch == tc.epochs:
            save_mosaic(generate(res.generator, cfg["n_samples"], cfg["seed"]), out / "samples" / f"epoch_{epoch:04d}")
        for snap in res.snapshots:
            if snap.epoch not in written:
                save_checkpoint(
                    out / "checkpoints" / f"epoch_{snap.epoch:04d}.gfc", res.generator, res.discriminator,
                    snap.epoch, tc.to_dict(), snap.rng_state, states=(snap.generator, snap.discriminator), extra=extra,
                )
                written.add(snap.epoch)
        res.history.to_csv(out / "history.csv")

    try:
        res = train(tc, data, on_epoch=on_epoch)
    except TrainingAborted as exc:
        raise CliError(f"training aborted{label}: {exc}", EXIT_TRAIN) from exc
    last = res.snapshots[-1]
    save_checkpoint(out / "final.gfc", res.generator, res.discriminator, last.epoch, tc.to_dict(), last.rng_state, extra=extra)
    res.history.to_csv(out / "history.csv")
    plotting.loss_curves(res.history, out / "losses.svg")
    try:
        rows = real_fake_curve(res.snapshots, data.images, min(64, len(data)), cfg["seed"],
                               res.generator.clone(), res.discriminator.clone())
        write_curve_csv(rows, out / "real_fake.csv")
        plotting.score_curves(*zip(*rows), out / "real_fake.svg")
    except ModeError:
        log.info("critic has no probability output; skipping the real/fake score curve")
    h = res.history
    print(f"train-gan{label}: {tc.loss_mode} epochs={tc.epochs} d_steps={res.d_steps} g_steps={res.g_steps} "
          f"final d_loss={h.d_loss[-1]:.4f} g_loss={h.g_loss[-1]:.4f} -> {out}")


def cmd_train_gan(cfg: dict) -> int:
    data = _load_data(cfg["data"])
    tc = _train_config(cfg)  # validate before writing anything else
    out = start_run("train-gan", cfg)
    print(f"config: loss_mode={tc.loss_mode} wgan_gp={tc.wgan} spectral_norm={tc.spectral_norm} "
          f"lambda={tc.gp_lambda} k={tc.k_disc_steps} lr={tc.lr} betas=({tc.beta1}, {tc.beta2})")
    extra = None
    if cfg["class_index"] is not None:
        extra = {"class_index": int(cfg["class_index"])}
        data = data.of_class(int(cfg["class_index"]))
    if cfg["per_class"]:
        for c in range(data.n_classes):
            sub = dict(cfg, seed=int(np.random.default_rng([cfg["seed"], c]).integers(2**31)))
            _train_one(sub, data.of_class(c), out / f"class_{c}", f" [class {data.class_names[c]}]",
                       {"class_index": c})
    else:
        _train_one(cfg, data, out, extra=extra)
    return 0


# ---------------------------------------------------------------------------
# evaluate


def _safe(name: str) -> str:
    return "".join(ch if ch.isalnum() else "_" for ch in name)


def cmd_evaluate(cfg: dict) -> int:
    from .metrics.features import ExtractorNotReady
    from .metrics.report import evaluate
    from .nn.gan import generate

    data = _load_data(cfg["data"])
    extractors = cfg["extractor"] if isinstance(cfg["extractor"], list) else [cfg["extractor"]]
    classifier = _load_classifier(cfg["classifier"])
    if not cfg["self_test"] and not cfg["checkpoint"]:
        raise CliError("give --checkpoint or --self-test", EXIT_CONFIG)
    out = start_run("evaluate", cfg)
    real = data.images
    if cfg["self_test"]:
        fake = real
    else:
        ckpt = _load_ckpt(cfg["checkpoint"])
        fake = generate(ckpt.generator, cfg["n"] or len(real), cfg["sample_seed"])
    for i, ex in enumerate(extractors):
        try:
            rep = evaluate(real, fake, ex, classifier, data.labels, cfg["kid_subset"], cfg["kid_subsets"],
                           cfg["k"], cfg["is_splits"], cfg["seed"])
        except ExtractorNotReady as exc:
            raise CliError(str(exc), EXIT_MISSING) from exc
        stem = "report" if i == 0 else f"report_{_safe(ex)}"
        rep.to_json(out / f"{stem}.json")
        rep.to_csv(out / f"{stem}.csv")
        print(rep.summary())
    return 0


# ---------------------------------------------------------------------------
# embed


def cmd_embed(cfg: dict) -> int:
    from .embed import EmbeddingLayout, export_scatter, pca, tsne
    from .metrics.features import ExtractorNotReady, extract_features
    from .nn.gan import generate

    data = _load_data(cfg["data"])
    if cfg["method"] not in ("pca", "tsne", "both"):
        raise CliError("--method must be pca, tsne or both", EXIT_CONFIG)
    classifier = _load_classifier(cfg["classifier"])
    n_real = min(cfg["n_real"] or len(data), len(data))
    images, labels = data.images[:n_real], data.labels[:n_real]
    source = ["real"] * n_real
    if cfg["checkpoint"]:
        ckpt = _load_ckpt(cfg["checkpoint"])
        n_fake = cfg["n_fake"] or n_real
        fake = generate(ckpt.generator, n_fake, cfg["sample_seed"])
        fake_label = ckpt.extra.get("class_index", -1) if ckpt.extra else -1
        images = np.concatenate([images, fake])
        labels = np.concatenate([labels, np.full(n_fake, fake_label)])
        source += ["synthetic"] * n_fake
    if cfg["method"] in ("tsne", "both") and len(images) < 4:
        raise CliError(f"t-SNE needs at least 4 points, got {len(images)}", EXIT_MISSING)
    out = start_run("embed", cfg)
    try:
        feats = extract_features(images, cfg["features"], classifier).features
    except ExtractorNotReady as exc:
        raise CliError(str(exc), EXIT_MISSING) from exc
    source = np.array(source)
    if cfg["method"] in ("pca", "both"):
        res = pca(feats, 2)
        layout = EmbeddingLayout(res.projection, labels, source, float("nan"))
        export_scatter(layout, out / "pca", "PCA")
        print(f"pca: explained variance {res.explained_variance_ratio.round(4).tolist()} -> {out / 'pca.csv'}")
    if cfg["method"] in ("tsne", "both"):
        perp = min(cfg["perp"], len(feats) - 1)
        layout = tsne(feats, perp, cfg["iters"], cfg["eta"], exaggeration=cfg["exaggeration"],
                      seed=cfg["seed"], labels=labels, source=source)
        export_scatter(layout, out / "tsne", "t-SNE")
        print(f"tsne: perplexity {perp:g} KL {layout.initial_kl:.4f} -> {layout.final_kl:.4f} -> {out / 'tsne.csv'}")
    return 0


# ---------------------------------------------------------------------------
# protocol


def _protocol_splits(cfg, data):
    from .data import SplitSpec, load_cache, split

    root = Path(cfg["data"])
    if all((root / s / "manifest.json").exists() for s in ("train", "val", "test")):
        train, val, test = (load_cache(root / s) for s in ("train", "val", "test"))
    else:
        train, val, test = split(data, SplitSpec(tuple(cfg["split"]), cfg["seed"], True))
    if cfg["train_per_class"]:
        rng = np.random.default_rng([cfg["seed"], 11])
        keep = []
        for c in range(train.n_classes):
            idx = np.flatnonzero(train.labels == c)
            if len(idx) < cfg["train_per_class"]:
                raise CliError(f"class {c} has only {len(idx)} training samples", EXIT_CONFIG)
            keep.append(np.sort(rng.choice(idx, cfg["train_per_class"], replace=False)))
        train = train.subset(np.concatenate(keep))
    return train, val, test


def _gate_loop(cfg, train, results, out):
    """Score every class generator; extend training of failing ones up to ``max_rounds`` times."""
    from .metrics.report import evaluate, quality_gate
    from .nn.gan import generate
    from .nn.gan import train as train_gan

    log_rows = []
    for c, res in sorted(results.items()):
        real = train.of_class(c).images
        for round_ in range(cfg["max_rounds"] + 1):
            fake = generate(res.generator, max(len(real), 4), cfg["seed"])
            rep = evaluate(real, fake, cfg["gate_extractor"], None, None, min(50, len(real)), 20,
                           3, 10, cfg["seed"])
            gate = quality_gate(fake, rep, cfg["gate_fid_max"], cfg["gate_precision_min"])
            log_rows.append({"class": c, "round": round_, "fid": rep.fid, "precision": rep.precision,
                             "passed": gate.passed})
            if gate.passed:
                break
            if round_ == cfg["max_rounds"]:
                write_json(out / "gate.json", log_rows)
                raise CliError(
                    f"quality gate failed for class {c} after {cfg['max_rounds']} extra rounds: "
                    f"fid={rep.fid:.4f} (max {cfg['gate_fid_max']}), precision={rep.precision:.4f} "
                    f"(min {cfg['gate_precision_min']})", EXIT_GATE)
            more = _train_config(_gan_cfg(cfg), epochs=cfg["round_epochs"])
            res = train_gan(more, train.of_class(c), resume=res)
        results[c] = res
    write_json(out / "gate.json", log_rows)
    return results


def _gan_cfg(cfg):
    return {
        **DEFAULTS["train-gan"], "epochs": cfg["gan_epochs"], "batch": cfg["gan_batch"], "width": cfg["gan_width"],
        "lr": cfg["gan_lr"], "loss": cfg["loss"], "sn": cfg["sn"], "gen_objective": cfg["gen_objective"],
        "seed": cfg["seed"],
    }


def cmd_protocol(cfg: dict) -> int:
    from . import plotting
    from .downstream import AugPolicy, ClassifierConfig, MissingGenerator, run_protocol
    from .downstream.classifier import ClassifierAborted
    from .nn.checkpoint import save_checkpoint
    from .nn.gan import TrainHistory, TrainingAborted, TrainResult, train

    data = _load_data(cfg["data"])
    regimens = cfg["regimens"]
    filt = {"off": (False,), "on": (True,), "both": (False, True)}.get(cfg["filtered"])
    if filt is None:
        raise CliError("--filtered must be off, on or both", EXIT_CONFIG)
    policy = AugPolicy.parse(cfg["policy"], cfg["seed"])
    clf = ClassifierConfig(epochs=cfg["clf_epochs"], batch_size=cfg["clf_batch"], lr=cfg["clf_lr"],
                           widths=tuple(cfg["clf_widths"]))
    need_gan = "gan" in regimens
    if need_gan and not (cfg["generators"] or cfg["train_first"]):
        raise CliError("GAN regimen needs --generators DIR or --train-first", EXIT_MISSING)
    out = start_run("protocol", cfg)
    train_set, val, test = _protocol_splits(cfg, data)
    generators = discriminators = None
    if need_gan:
        results = {}
        for c in range(train_set.n_classes):
            if cfg["train_first"]:
                tc = _train_config({**_gan_cfg(cfg), "seed": int(np.random.default_rng([cfg["seed"], c]).integers(2**31))})
                try:
                    results[c] = train(tc, train_set.of_class(c))
                except TrainingAborted as exc:
                    raise CliError(f"GAN training aborted for class {c}: {exc}", EXIT_TRAIN) from exc
            else:
                ckpt = _load_ckpt(Path(cfg["generators"]) / f"class_{c}")
                from .nn.optim import Adam

                tc = _train_config(_gan_cfg(cfg), epochs=cfg["round_epochs"])
                res = TrainResult(ckpt.generator, ckpt.discriminator, TrainHistory(), [], tc)
                res.rng = np.random.default_rng([cfg["seed"], c, 99])
                res.optimizers = tuple(Adam(n.params, tc.lr, tc.beta1, tc.beta2) for n in (ckpt.generator, ckpt.discriminator))
                results[c] = res
        results = _gate_loop(cfg, train_set, results, out)
        generators = {c: r.generator for c, r in results.items()}
        discriminators = {c: r.discriminator for c, r in results.items()}
        (out / "gans").mkdir(exist_ok=True)
        for c, r in results.items():
            save_checkpoint(out / "gans" / f"class_{c}.gfc", r.generator, r.discriminator,
                            r.history.epoch[-1] if len(r.history) else 0, r.config.to_dict(),
                            extra={"class_index": c})
    try:
        table = run_protocol(
            train_set, val, test, generators, regimens, cfg["ratios"], filt, range(cfg["seeds"]), clf, policy,
            discriminators, cfg["positive_class"], cfg["spec_target"],
        )
    except MissingGenerator as exc:
        raise CliError(str(exc), EXIT_MISSING) from exc
    except ClassifierAborted as exc:
        raise CliError(str(exc), EXIT_TRAIN) from exc
    table.to_csv(out / "protocol.csv")
    (out / "protocol.md").write_text(table.to_markdown())
    table.write_cells(out / "cells")
    summary = table.summary()
    plotting.grouped_bars(
        list(summary), {"accuracy": ([s["accuracy"][0] for s in summary.values()],
                                     [s["accuracy"][1] for s in summary.values()])},
        out / "protocol.svg", "test accuracy",
    )
    print(table.to_markdown(), end="")
    return 0


# ---------------------------------------------------------------------------
# ablate


def cmd_ablate(cfg: dict) -> int:
    from . import plotting
    from .ablation import run_ablation
    from .nn.gan import LOSS_MODES, TrainingAborted

    data = _load_data(cfg["data"])
    bad = sorted(set(cfg["modes"]) - set(LOSS_MODES))
    if bad:
        raise CliError(f"unknown modes {bad}; choose from {LOSS_MODES}", EXIT_CONFIG)
    base = _train_config({**DEFAULTS["train-gan"], **{k: cfg[k] for k in ("epochs", "batch", "width", "lr",
                                                                       "gen_objective", "gp_lambda", "seed")}})
    out = start_run("ablate", cfg)
    try:
        table = run_ablation(data, base, cfg["modes"], range(cfg["seeds"]), cfg["extractor"], cfg["n_samples"])
    except TrainingAborted as exc:
        raise CliError(f"training aborted: {exc}", EXIT_TRAIN) from exc
    table.to_csv(out / "ablation.csv")
    (out / "ablation.md").write_text(table.to_markdown())
    means = table.mean_fid()
    plotting.grouped_bars(list(means), {"fid": ([m for m, _ in means.values()], [s for _, s in means.values()])},
                          out / "ablation.svg", f"FID ({table.extractor})")
    print(table.to_markdown(), end="")
    return 0


# ---------------------------------------------------------------------------
# parser


def _floats(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t.strip()]


def _ints(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t.strip()]


def _words(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def build_parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    parser = argparse.ArgumentParser(prog="ganforge", description="GAN augmentation pipeline on a numpy autodiff core.")
    parser.add_argument("--version", action="version", version=f"ganforge {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name, help_text):
        p = sub.add_parser(name, help=help_text, argument_default=S)
        p.add_argument("--config", help="TOML file of settings (flags win)")
        p.add_argument("--seed", type=int, help="global seed (default: $GANFORGE_SEED or 0)")
        p.add_argument("--out", help="output directory")
        return p

    p = command("dataset", "build a dataset cache from a toy generator or an image directory")
    p.add_argument("--toy", choices=["glyphs", "lungfields"])
    p.add_argument("--from", dest="from_dir", metavar="DIR", help="class-per-subdirectory image tree")
    p.add_argument("--classes", type=int)
    p.add_argument("--per-class", dest="per_class", type=int)
    p.add_argument("--noise", type=float)
    p.add_argument("--channels", type=int, choices=[1, 3])
    p.add_argument("--split", type=_floats, help="train,val,test fractions; writes split caches too")
    p.add_argument("--no-stratify", dest="stratified", action="store_false")

    p = command("train-gan", "train the generator/discriminator pair")
    p.add_argument("--data")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch", type=int)
    p.add_argument("--latent-dim", dest="latent_dim", type=int)
    p.add_argument("--k", type=int, help="discriminator steps per generator step")
    p.add_argument("--lr", type=float)
    p.add_argument("--beta1", type=float)
    p.add_argument("--beta2", type=float)
    p.add_argument("--loss", choices=["vanilla", "wgan-gp", "wgan_gp"])
    p.add_argument("--sn", action="store_true", help="spectral normalization on discriminator weights")
    p.add_argument("--lambda", dest="gp_lambda", type=float, help="gradient penalty weight")
    p.add_argument("--gen-objective", dest="gen_objective", choices=["minimax", "non_saturating"])
    p.add_argument("--d-batch", dest="d_batch", choices=["joint", "separate"])
    p.add_argument("--width", type=int, help="channel multiplier (64 reproduces the full tables)")
    p.add_argument("--power-iters", dest="power_iters", type=int)
    p.add_argument("--checkpoint-every", dest="checkpoint_every", type=int)
    p.add_argument("--sample-every", dest="sample_every", type=int)
    p.add_argument("--n-samples", dest="n_samples", type=int)
    p.add_argument("--per-class", dest="per_class", action="store_true", help="one GAN per class")
    p.add_argument("--class-index", dest="class_index", type=int)
    p.add_argument("--wallclock", action="store_true", help="record epoch seconds (breaks byte determinism)")

    p = command("evaluate", "IS / FID / KID / precision / recall of generated samples")
    p.add_argument("--data")
    p.add_argument("--checkpoint")
    p.add_argument("--self-test", dest="self_test", action="store_true", help="score the real set against itself")
    p.add_argument("--extractor", type=_words, help="comma list: raw-pixels, rp:D[:seed], classifier-features")
    p.add_argument("--classifier", help="trained classifier file for classifier-features")
    p.add_argument("--n", type=int)
    p.add_argument("--kid-subset", dest="kid_subset", type=int)
    p.add_argument("--kid-subsets", dest="kid_subsets", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--is-splits", dest="is_splits", type=int)
    p.add_argument("--sample-seed", dest="sample_seed", type=int)

    p = command("embed", "PCA / t-SNE layouts of real and generated samples")
    p.add_argument("--data")
    p.add_argument("--checkpoint")
    p.add_argument("--method", choices=["pca", "tsne", "both"])
    p.add_argument("--features")
    p.add_argument("--classifier")
    p.add_argument("--n-real", dest="n_real", type=int)
    p.add_argument("--n-fake", dest="n_fake", type=int)
    p.add_argument("--perp", type=float)
    p.add_argument("--iters", type=int)
    p.add_argument("--eta", type=float)
    p.add_argument("--exaggeration", type=float)
    p.add_argument("--sample-seed", dest="sample_seed", type=int)

    p = command("protocol", "real-only vs classical vs GAN-augmented classifier comparison")
    p.add_argument("--data")
    p.add_argument("--split", type=_floats)
    p.add_argument("--train-per-class", dest="train_per_class", type=int)
    p.add_argument("--generators", help="train-gan --per-class output directory")
    p.add_argument("--train-first", dest="train_first", action="store_true")
    p.add_argument("--regimens", type=_words)
    p.add_argument("--ratios", type=_floats)
    p.add_argument("--filtered", choices=["off", "on", "both"])
    p.add_argument("--seeds", type=int, help="number of seeds, 0..n-1")
    p.add_argument("--clf-epochs", dest="clf_epochs", type=int)
    p.add_argument("--clf-batch", dest="clf_batch", type=int)
    p.add_argument("--clf-lr", dest="clf_lr", type=float)
    p.add_argument("--clf-widths", dest="clf_widths", type=_ints)
    p.add_argument("--policy", help="classical, or e.g. flip+rotate:10+mixup:0.2")
    p.add_argument("--positive-class", dest="positive_class", type=int)
    p.add_argument("--spec-target", dest="spec_target", type=float)
    p.add_argument("--gan-epochs", dest="gan_epochs", type=int)
    p.add_argument("--gan-batch", dest="gan_batch", type=int)
    p.add_argument("--gan-width", dest="gan_width", type=int)
    p.add_argument("--gan-lr", dest="gan_lr", type=float)
    p.add_argument("--loss", choices=["vanilla", "wgan-gp", "wgan_gp"])
    p.add_argument("--sn", action="store_true")
    p.add_argument("--gen-objective", dest="gen_objective", choices=["minimax", "non_saturating"])
    p.add_argument("--gate-fid-max", dest="gate_fid_max", type=float)
    p.add_argument("--gate-precision-min", dest="gate_precision_min", type=float)
    p.add_argument("--gate-extractor", dest="gate_extractor")
    p.add_argument("--max-rounds", dest="max_rounds", type=int)
    p.add_argument("--round-epochs", dest="round_epochs", type=int)

    p = command("ablate", "WGAN-GP / spectral-norm on-off grid with relative FID deltas")
    p.add_argument("--data")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch", type=int)
    p.add_argument("--width", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--gen-objective", dest="gen_objective", choices=["minimax", "non_saturating"])
    p.add_argument("--lambda", dest="gp_lambda", type=float)
    p.add_argument("--modes", type=_words)
    p.add_argument("--seeds", type=int)
    p.add_argument("--extractor")
    p.add_argument("--n-samples", dest="n_samples", type=int)
    return parser


COMMANDS = {
    "dataset": cmd_dataset,
    "train-gan": cmd_train_gan,
    "evaluate": cmd_evaluate,
    "embed": cmd_embed,
    "protocol": cmd_protocol,
    "ablate": cmd_ablate,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    command = args.command
    ns = argparse.Namespace(**{k: v for k, v in vars(args).items() if k not in ("verbose",)})
    try:
        cfg = resolve(command, ns)
        return COMMANDS[command](cfg)
    except CliError as exc:
        print(f"ganforge {command}: {exc}", file=sys.stderr)
        return exc.code
    except (ValueError, TypeError, KeyError) as exc:
        print(f"ganforge {command}: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
