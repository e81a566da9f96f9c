from .checkpoint import Checkpoint, load_checkpoint, load_network, save_checkpoint, save_network
from .gan import (
    LOSS_MODES,
    TrainConfig,
    TrainHistory,
    TrainingAborted,
    TrainResult,
    generate,
    gradient_penalty,
    non_saturating_gen_loss,
    train,
    train_per_class,
    vanilla_losses,
    wgan_losses,
)
from .networks import Network, build_classifier, build_discriminator, build_generator, predict, rebuild
from .optim import Adam, adam_step
from .stabilizers import power_iteration, spectral_normalize

__all__ = [
    "LOSS_MODES",
    "Adam",
    "Checkpoint",
    "Network",
    "TrainConfig",
    "TrainHistory",
    "TrainResult",
    "TrainingAborted",
    "adam_step",
    "build_classifier",
    "build_discriminator",
    "build_generator",
    "generate",
    "gradient_penalty",
    "load_checkpoint",
    "load_network",
    "non_saturating_gen_loss",
    "power_iteration",
    "predict",
    "rebuild",
    "save_checkpoint",
    "save_network",
    "spectral_normalize",
    "train",
    "train_per_class",
    "vanilla_losses",
    "wgan_losses",
]
