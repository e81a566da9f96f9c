"""Adversarial training: vanilla minimax, WGAN-GP, and spectral-norm variants."""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from ..autodiff import tensor as T
from ..autodiff.tensor import Tensor, grad, no_grad
from .networks import Network, build_discriminator, build_generator
from .optim import Adam
from .stabilizers import gradient_penalty

log = logging.getLogger(__name__)

LOSS_MODES = ("vanilla", "wgan_gp", "vanilla+spectral_norm", "wgan_gp+spectral_norm")
SCORE_CLAMP = 1e-7


class TrainingAborted(RuntimeError):
    def __init__(self, message, epoch=None, iteration=None):
        super().__init__(message)
        self.epoch = epoch
        self.iteration = iteration


@dataclass
class TrainConfig:
    epochs: int = 300
    batch_size: int = 32
    latent_dim: int = 100
    k_disc_steps: int = 1
    lr: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    adam_eps: float = 1e-8
    loss_mode: str = "vanilla"
    gp_lambda: float = 10.0
    gen_objective: str = "minimax"
    d_batch: str = "joint"
    width: int = 64
    n_power_iters: int = 1
    checkpoint_every: int = 0
    seed: int = 0
    record_wallclock: bool = False

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 2:
            raise ValueError("batch_size must be >= 2")
        if self.latent_dim < 1:
            raise ValueError("latent_dim must be >= 1")
        if self.k_disc_steps < 1:
            raise ValueError("k_disc_steps must be >= 1")
        if self.gp_lambda < 0:
            raise ValueError("gp_lambda must be >= 0")
        if self.loss_mode not in LOSS_MODES:
            raise ValueError(f"loss_mode must be one of {LOSS_MODES}")
        if self.gen_objective not in ("minimax", "non_saturating"):
            raise ValueError("gen_objective must be 'minimax' or 'non_saturating'")
        if self.d_batch not in ("joint", "separate"):
            raise ValueError("d_batch must be 'joint' or 'separate'")
        if self.width < 1:
            raise ValueError("width must be >= 1")

    @property
    def wgan(self) -> bool:
        return self.loss_mode.startswith("wgan_gp")

    @property
    def spectral_norm(self) -> bool:
        return self.loss_mode.endswith("spectral_norm")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrainHistory:
    epoch: list = field(default_factory=list)
    d_loss: list = field(default_factory=list)
    g_loss: list = field(default_factory=list)
    d_real_mean: list = field(default_factory=list)
    d_fake_mean: list = field(default_factory=list)
    seconds: list = field(default_factory=list)

    COLUMNS = ("epoch", "d_loss", "g_loss", "d_real_mean", "d_fake_mean", "seconds")

    def __len__(self):
        return len(self.epoch)

    def rows(self):
        return list(zip(*(getattr(self, c) for c in self.COLUMNS)))

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(",".join(self.COLUMNS) + "\n")
            for row in self.rows():
                fh.write(f"{row[0]}," + ",".join(f"{v:.12g}" for v in row[1:]) + "\n")

    @classmethod
    def from_csv(cls, path) -> "TrainHistory":
        hist = cls()
        with open(path) as fh:
            header = fh.readline().strip().split(",")
            for line in fh:
                vals = line.strip().split(",")
                for name, v in zip(header, vals):
                    getattr(hist, name).append(int(v) if name == "epoch" else float(v))
        return hist


@dataclass
class Snapshot:
    """In-memory checkpoint: network states plus the RNG state at that epoch."""

    epoch: int
    generator: dict
    discriminator: dict
    rng_state: dict


@dataclass
class TrainResult:
    generator: Network
    discriminator: Network
    history: TrainHistory
    snapshots: list
    config: TrainConfig
    d_steps: int = 0
    g_steps: int = 0
    rng: object = None
    optimizers: tuple = ()


def vanilla_losses(d_real, d_fake):
    """``(disc_loss, gen_loss)`` of the minimax game; scores are clamped before logs."""
    d_real = T.clip(T.as_tensor(d_real), SCORE_CLAMP, 1 - SCORE_CLAMP)
    d_fake = T.clip(T.as_tensor(d_fake), SCORE_CLAMP, 1 - SCORE_CLAMP)
    log_one_minus_fake = T.log(1.0 - d_fake)
    disc = T.neg(T.mean(T.log(d_real)) + T.mean(log_one_minus_fake))
    gen = T.mean(log_one_minus_fake)
    return disc, gen


def non_saturating_gen_loss(d_fake) -> Tensor:
    d_fake = T.clip(T.as_tensor(d_fake), SCORE_CLAMP, 1 - SCORE_CLAMP)
    return T.neg(T.mean(T.log(d_fake)))


def wgan_losses(c_real, c_fake):
    """Critic loss (without penalty) and generator loss for the Wasserstein game."""
    return T.mean(c_fake) - T.mean(c_real), T.neg(T.mean(c_fake))


def build_pair(config: TrainConfig, channels: int, rng) -> tuple[Network, Network]:
    g_seed, d_seed = rng.integers(0, 2**63, size=2)
    gen = build_generator(config.latent_dim, channels, config.width, seed=int(g_seed))
    disc = build_discriminator(
        channels,
        config.width,
        critic=config.wgan,
        spectral_norm=config.spectral_norm,
        n_power_iters=config.n_power_iters,
        seed=int(d_seed),
    )
    return gen, disc


def _noise(rng, m, latent_dim):
    return rng.standard_normal((m, latent_dim, 1, 1))


def _score(disc: Network, real, fake, mode: str):
    """Discriminator scores for a real and a fake batch.

    ``joint`` runs both through one forward pass so batch-norm statistics are
    shared; with per-batch statistics a global brightness offset between real
    and fake is normalized away and the generator never hears about it.
    """
    if mode == "separate":
        return disc(real), disc(fake)
    m = len(real)
    scores = disc(T.concat([real, fake]))
    return T.slice_axis(scores, 0, m), T.slice_axis(scores, m, len(scores.data))


def _grads(loss: Tensor, net: Network) -> dict:
    names = list(net.params)
    gs = grad(loss, [net.params[k] for k in names])
    return {k: g.data for k, g in zip(names, gs)}


def _check_finite(value: float, what: str, epoch: int, iteration: int):
    if not np.isfinite(value):
        raise TrainingAborted(f"non-finite {what} at epoch {epoch}, iteration {iteration}", epoch, iteration)


def _step(opt: Adam, grads: dict, epoch: int, iteration: int):
    try:
        opt.step(grads)
    except FloatingPointError as exc:
        raise TrainingAborted(f"{exc} at epoch {epoch}, iteration {iteration}", epoch, iteration) from exc


def train(config: TrainConfig, data, on_epoch=None, resume: "TrainResult | None" = None, rng=None) -> TrainResult:
    """Minibatch adversarial training.

    Each iteration runs ``k_disc_steps`` discriminator updates, each on fresh
    noise and a real minibatch, then one generator update on fresh noise.
    An epoch has ``N // batch_size`` iterations (at least one). Snapshots are
    kept every ``checkpoint_every`` epochs (0 disables) and after the last.
    ``on_epoch(epoch, result)`` is called after each epoch.

    ``resume`` continues an earlier result for ``config.epochs`` more epochs,
    keeping its networks, optimizer moments, RNG and history.
    """
    images = data.images if hasattr(data, "images") else np.asarray(data)
    n = len(images)
    if n == 0:
        raise ValueError("training set is empty")
    if images.shape[2:] != (64, 64):
        raise ValueError(f"training images must be 64 x 64, got {images.shape[2:]}")
    if images.min() < -1 - 1e-9 or images.max() > 1 + 1e-9:
        raise ValueError("training images must lie in [-1, 1]")
    if resume is not None:
        result = resume
        result.config = config
        rng = result.rng
        generator, discriminator = result.generator, result.discriminator
        opt_g, opt_d = result.optimizers
        start_epoch = result.history.epoch[-1] if len(result.history) else 0
    else:
        rng = np.random.default_rng(config.seed) if rng is None else rng
        generator, discriminator = build_pair(config, images.shape[1], rng)
        opt_g = Adam(generator.params, config.lr, config.beta1, config.beta2, config.adam_eps)
        opt_d = Adam(discriminator.params, config.lr, config.beta1, config.beta2, config.adam_eps)
        result = TrainResult(generator, discriminator, TrainHistory(), [], config)
        result.rng = rng
        result.optimizers = (opt_g, opt_d)
        start_epoch = 0
    generator.train()
    discriminator.train()
    history = result.history
    m = min(config.batch_size, n)
    batches = max(1, n // m)

    for epoch in range(start_epoch + 1, start_epoch + config.epochs + 1):
        t0 = time.perf_counter()
        sums = np.zeros(4)
        d_count = 0
        g_count = 0
        order = rng.permutation(n)
        for it in range(batches):
            for k in range(config.k_disc_steps):
                if k == 0:
                    idx = order[it * m : (it + 1) * m]
                else:
                    idx = rng.choice(n, m, replace=False)
                real = images[idx]
                z = _noise(rng, m, config.latent_dim)
                with no_grad():
                    fake = generator(z).data
                d_real, d_fake = _score(discriminator, real, fake, config.d_batch)
                if config.wgan:
                    d_loss, _ = wgan_losses(d_real, d_fake)
                    gp_seed = int(rng.integers(0, 2**63))
                    d_loss = d_loss + gradient_penalty(discriminator, real, fake, config.gp_lambda, gp_seed)
                else:
                    d_loss, _ = vanilla_losses(d_real, d_fake)
                _check_finite(d_loss.item(), "discriminator loss", epoch, it)
                _step(opt_d, _grads(d_loss, discriminator), epoch, it)
                result.d_steps += 1
                sums[0] += d_loss.item()
                sums[2] += d_real.data.mean()
                sums[3] += d_fake.data.mean()
                d_count += 1
            z = _noise(rng, m, config.latent_dim)
            _, d_fake = _score(discriminator, real, generator(z), config.d_batch)
            if config.wgan:
                _, g_loss = wgan_losses(Tensor(np.zeros(1)), d_fake)
            elif config.gen_objective == "non_saturating":
                g_loss = non_saturating_gen_loss(d_fake)
            else:
                _, g_loss = vanilla_losses(Tensor(np.full(1, 0.5)), d_fake)
            _check_finite(g_loss.item(), "generator loss", epoch, it)
            _step(opt_g, _grads(g_loss, generator), epoch, it)
            result.g_steps += 1
            sums[1] += g_loss.item()
            g_count += 1
        history.epoch.append(epoch)
        history.d_loss.append(sums[0] / d_count)
        history.g_loss.append(sums[1] / g_count)
        history.d_real_mean.append(sums[2] / d_count)
        history.d_fake_mean.append(sums[3] / d_count)
        history.seconds.append(time.perf_counter() - t0 if config.record_wallclock else 0.0)
        last = epoch == start_epoch + config.epochs
        if last or (config.checkpoint_every and epoch % config.checkpoint_every == 0):
            result.snapshots.append(
                Snapshot(epoch, generator.state_dict(), discriminator.state_dict(), rng.bit_generator.state)
            )
        if on_epoch is not None:
            on_epoch(epoch, result)
    return result


def generate(generator: Network, n: int, seed=0, batch_size: int = 64) -> np.ndarray:
    """``n`` samples from standard-normal latents drawn from ``seed``, eval mode."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    z = _noise(rng, n, generator.arch["latent_dim"])
    from .networks import predict

    return predict(generator, z, batch_size)


def train_per_class(config: TrainConfig, data, classes=None) -> dict:
    """One independent GAN per class subset; seeds derive from ``(seed, class)``."""
    out = {}
    labels = np.unique(data.labels) if classes is None else classes
    for c in labels:
        sub = data.of_class(int(c))
        child = np.random.default_rng([config.seed, int(c)])
        out[int(c)] = train(config, sub, rng=child)
    return out
