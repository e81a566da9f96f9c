"""The generator, discriminator, and downstream classifier stacks."""

from __future__ import annotations

import copy

import numpy as np

from ..autodiff.conv import DimensionError
from ..autodiff.tensor import Tensor, as_tensor, no_grad
from .layers import (
    BatchNorm2d,
    Conv2d,
    ConvTranspose2d,
    Flatten,
    GlobalAvgPool,
    LeakyReLU,
    Linear,
    ReLU,
    Sigmoid,
    Tanh,
)

IMAGE_SIZE = 64


class Network:
    """An ordered stack of layers with named parameters and buffers.

    Parameter and buffer names are ``"<layer index>.<name>"``. ``arch`` holds
    the builder arguments so a network can be rebuilt from a checkpoint.
    """

    def __init__(self, layers, arch: dict, input_shape: tuple, feature_layer: int | None = None):
        self.layers = list(layers)
        self.arch = dict(arch)
        self.input_shape = tuple(input_shape)
        self.feature_layer = feature_layer
        self.training = True

    @property
    def role(self) -> str:
        return self.arch["role"]

    @property
    def params(self) -> dict[str, Tensor]:
        return {f"{i}.{k}": v for i, layer in enumerate(self.layers) for k, v in layer.params.items()}

    @property
    def buffers(self) -> dict[str, np.ndarray]:
        return {f"{i}.{k}": v for i, layer in enumerate(self.layers) for k, v in layer.buffers.items()}

    def parameters(self) -> list[Tensor]:
        return list(self.params.values())

    def num_params(self) -> int:
        return sum(p.size for p in self.parameters())

    def train(self) -> "Network":
        self.training = True
        return self

    def eval(self) -> "Network":
        self.training = False
        return self

    def _check_input(self, x: Tensor):
        if tuple(x.shape[1:]) != self.input_shape:
            axes = [i + 1 for i, (a, b) in enumerate(zip(x.shape[1:], self.input_shape)) if a != b]
            raise DimensionError(
                f"{self.role} expects inputs of shape N x {' x '.join(map(str, self.input_shape))}, "
                f"got {x.shape} (axes {axes or 'rank'} differ)"
            )

    def forward(self, x, upto: int | None = None) -> Tensor:
        x = as_tensor(x)
        self._check_input(x)
        stop = len(self.layers) if upto is None else upto
        for layer in self.layers[:stop]:
            x = layer.forward(x, self.training)
        return x

    __call__ = forward

    def features(self, x) -> Tensor:
        if self.feature_layer is None:
            raise ValueError(f"{self.role} network exposes no feature layer")
        return self.forward(x, upto=self.feature_layer)

    def layer_table(self) -> list[tuple[int, str, tuple]]:
        """Rows of (layer number, layer type, output shape), numbered from 1."""
        rows = []
        shape = self.input_shape
        for i, layer in enumerate(self.layers, start=1):
            shape = layer.output_shape(shape)
            rows.append((i, layer.kind, shape))
        return rows

    def state_dict(self) -> dict[str, np.ndarray]:
        state = {f"param:{k}": v.data.copy() for k, v in self.params.items()}
        state.update({f"buffer:{k}": v.copy() for k, v in self.buffers.items()})
        return state

    def load_state_dict(self, state: dict) -> None:
        params, buffers = self.params, self.buffers
        expected = {f"param:{k}" for k in params} | {f"buffer:{k}" for k in buffers}
        missing = expected - set(state)
        if missing:
            raise KeyError(f"state is missing entries: {sorted(missing)}")
        for k, t in params.items():
            arr = np.asarray(state[f"param:{k}"], dtype=np.float64)
            if arr.shape != t.shape:
                raise DimensionError(f"parameter {k}: expected {t.shape}, got {arr.shape}")
            t.data = arr.copy()
        for k, b in buffers.items():
            b[...] = state[f"buffer:{k}"]

    def clone(self) -> "Network":
        return copy.deepcopy(self)


def build_generator(latent_dim: int = 100, out_channels: int = 3, width: int = 64, seed=0) -> Network:
    """Five transposed convolutions, latent x 1 x 1 -> out_channels x 64 x 64."""
    if latent_dim < 1:
        raise ValueError("latent_dim must be >= 1")
    if out_channels not in (1, 3):
        raise ValueError("out_channels must be 1 or 3")
    rng = np.random.default_rng(seed)
    chans = [latent_dim, 8 * width, 4 * width, 2 * width, width]
    layers = [ConvTranspose2d(chans[0], chans[1], 4, 1, 0, rng), BatchNorm2d(chans[1], rng), ReLU()]
    for cin, cout in zip(chans[1:-1], chans[2:]):
        layers += [ConvTranspose2d(cin, cout, 4, 2, 1, rng), BatchNorm2d(cout, rng), ReLU()]
    layers += [ConvTranspose2d(width, out_channels, 4, 2, 1, rng), Tanh()]
    arch = {"role": "generator", "latent_dim": latent_dim, "out_channels": out_channels, "width": width}
    return Network(layers, arch, (latent_dim, 1, 1))


def build_discriminator(
    in_channels: int = 3,
    width: int = 64,
    critic: bool = False,
    spectral_norm: bool = False,
    n_power_iters: int = 1,
    seed=0,
) -> Network:
    """Strided convolutions 64 -> 32 -> 16 -> 8 -> 4 -> 1, scalar per sample.

    ``critic=True`` (WGAN-GP) drops batch normalization and the terminal
    sigmoid. ``spectral_norm=True`` normalizes every convolution weight.
    """
    if in_channels not in (1, 3):
        raise ValueError("in_channels must be 1 or 3")
    rng = np.random.default_rng(seed)
    sn = dict(spectral_norm=spectral_norm, n_power_iters=n_power_iters)
    chans = [in_channels, width, 2 * width, 4 * width, 8 * width]
    layers = []
    for cin, cout in zip(chans[:-1], chans[1:]):
        layers.append(Conv2d(cin, cout, 4, 2, 1, rng, **sn))
        if not critic:
            layers.append(BatchNorm2d(cout, rng))
        layers.append(LeakyReLU())
    layers += [Conv2d(8 * width, 1, 4, 1, 0, rng, **sn), Flatten()]
    if not critic:
        layers.append(Sigmoid())
    arch = {
        "role": "discriminator", "in_channels": in_channels, "width": width, "critic": critic,
        "spectral_norm": spectral_norm, "n_power_iters": n_power_iters,
    }
    return Network(layers, arch, (in_channels, IMAGE_SIZE, IMAGE_SIZE))


def build_classifier(in_channels: int = 3, n_classes: int = 2, widths=(32, 64, 128), seed=0) -> Network:
    """Three stride-2 conv blocks, global average pool, linear head.

    The pooled activations (width ``widths[-1]``, 128 by default) are the
    penultimate features used by the metric extractors.
    """
    if n_classes < 2:
        raise ValueError("n_classes must be >= 2")
    rng = np.random.default_rng(seed)
    layers = []
    cin = in_channels
    for cout in widths:
        layers += [Conv2d(cin, cout, 4, 2, 1, rng), BatchNorm2d(cout, rng), LeakyReLU()]
        cin = cout
    layers.append(GlobalAvgPool())
    feature_layer = len(layers)
    layers.append(Linear(cin, n_classes, rng))
    arch = {"role": "classifier", "in_channels": in_channels, "n_classes": n_classes, "widths": list(widths)}
    return Network(layers, arch, (in_channels, IMAGE_SIZE, IMAGE_SIZE), feature_layer=feature_layer)


def rebuild(arch: dict) -> Network:
    """Construct an empty network of the given architecture."""
    arch = dict(arch)
    role = arch.pop("role")
    if role == "generator":
        return build_generator(**arch)
    if role == "discriminator":
        return build_discriminator(**arch)
    if role == "classifier":
        arch["widths"] = tuple(arch["widths"])
        return build_classifier(**arch)
    raise ValueError(f"unknown network role {role!r}")


def predict(net: Network, x: np.ndarray, batch_size: int = 64, features: bool = False) -> np.ndarray:
    """Forward pass in eval mode, batched, without recording gradients."""
    was_training = net.training
    net.eval()
    outs = []
    try:
        with no_grad():
            for i in range(0, len(x), batch_size):
                chunk = x[i : i + batch_size]
                out = net.features(chunk) if features else net(chunk)
                outs.append(out.data)
    finally:
        net.training = was_training
    return np.concatenate(outs, axis=0) if outs else np.zeros((0,))
