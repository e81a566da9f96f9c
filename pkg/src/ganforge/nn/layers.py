from __future__ import annotations

import numpy as np

from ..autodiff import functional as F
from ..autodiff import tensor as T
from ..autodiff.conv import (
    DimensionError,
    conv2d,
    conv2d_transpose,
    conv_output_size,
    conv_transpose_output_size,
)
from ..autodiff.tensor import Tensor
from .stabilizers import spectral_weight

INIT_STD = 0.02


class Layer:
    kind = "Layer"

    def __init__(self):
        self.params: dict[str, Tensor] = {}
        self.buffers: dict[str, np.ndarray] = {}

    def forward(self, x: Tensor, training: bool) -> Tensor:
        raise NotImplementedError

    def output_shape(self, shape: tuple) -> tuple:
        return shape

    def describe(self) -> dict:
        return {"kind": self.kind}

    def __repr__(self):
        args = ", ".join(f"{k}={v}" for k, v in self.describe().items() if k != "kind")
        return f"{self.kind}({args})"


class Conv2d(Layer):
    kind = "Conv2d"

    def __init__(self, cin, cout, k, stride, padding, rng, spectral_norm=False, n_power_iters=1):
        super().__init__()
        self.cin, self.cout, self.k, self.stride, self.padding = cin, cout, k, stride, padding
        self.spectral_norm = spectral_norm
        self.n_power_iters = n_power_iters
        self.params["weight"] = Tensor(rng.normal(0.0, INIT_STD, (cout, cin, k, k)), requires_grad=True)
        if spectral_norm:
            u = rng.standard_normal(cout)
            self.buffers["u"] = u / np.linalg.norm(u)

    def effective_weight(self, training: bool) -> Tensor:
        w = self.params["weight"]
        if not self.spectral_norm:
            return w
        return spectral_weight(w, self.buffers["u"], self.n_power_iters, update=training)

    def forward(self, x, training):
        return conv2d(x, self.effective_weight(training), self.stride, self.padding)

    def output_shape(self, shape):
        c, h, w = shape
        if c != self.cin:
            raise DimensionError(f"Conv2d expects {self.cin} channels on axis 1, got {c}")
        return (
            self.cout,
            conv_output_size(h, self.k, self.stride, self.padding),
            conv_output_size(w, self.k, self.stride, self.padding),
        )

    def describe(self):
        return {
            "kind": self.kind, "cin": self.cin, "cout": self.cout, "k": self.k,
            "stride": self.stride, "padding": self.padding, "spectral_norm": self.spectral_norm,
        }


class ConvTranspose2d(Layer):
    kind = "ConvTranspose2d"

    def __init__(self, cin, cout, k, stride, padding, rng):
        super().__init__()
        self.cin, self.cout, self.k, self.stride, self.padding = cin, cout, k, stride, padding
        self.params["weight"] = Tensor(rng.normal(0.0, INIT_STD, (cin, cout, k, k)), requires_grad=True)

    def forward(self, x, training):
        return conv2d_transpose(x, self.params["weight"], self.stride, self.padding)

    def output_shape(self, shape):
        c, h, w = shape
        if c != self.cin:
            raise DimensionError(f"ConvTranspose2d expects {self.cin} channels on axis 1, got {c}")
        return (
            self.cout,
            conv_transpose_output_size(h, self.k, self.stride, self.padding),
            conv_transpose_output_size(w, self.k, self.stride, self.padding),
        )

    def describe(self):
        return {
            "kind": self.kind, "cin": self.cin, "cout": self.cout, "k": self.k,
            "stride": self.stride, "padding": self.padding,
        }


class BatchNorm2d(Layer):
    kind = "BatchNorm2d"

    def __init__(self, channels, rng, momentum=F.BN_MOMENTUM, eps=F.BN_EPS):
        super().__init__()
        self.channels, self.momentum, self.eps = channels, momentum, eps
        self.params["gamma"] = Tensor(rng.normal(1.0, INIT_STD, channels), requires_grad=True)
        self.params["beta"] = Tensor(np.zeros(channels), requires_grad=True)
        self.buffers["running_mean"] = np.zeros(channels)
        self.buffers["running_var"] = np.ones(channels)

    def forward(self, x, training):
        return F.batch_norm(
            x,
            self.params["gamma"],
            self.params["beta"],
            self.buffers["running_mean"],
            self.buffers["running_var"],
            training=training,
            momentum=self.momentum,
            eps=self.eps,
        )

    def describe(self):
        return {"kind": self.kind, "channels": self.channels}


class Activation(Layer):
    def __init__(self, fn: str, kind: str, slope: float = F.LEAKY_SLOPE):
        super().__init__()
        self.fn, self.kind, self.slope = fn, kind, slope

    def forward(self, x, training):
        return F.activation(self.fn, x, self.slope)

    def describe(self):
        d = {"kind": self.kind}
        if self.fn == "leaky_relu":
            d["slope"] = self.slope
        return d


def ReLU():
    return Activation("relu", "ReLU")


def LeakyReLU(slope=F.LEAKY_SLOPE):
    return Activation("leaky_relu", "LeakyReLU", slope)


def Tanh():
    return Activation("tanh", "Tanh")


def Sigmoid():
    return Activation("sigmoid", "Sigmoid")


class Flatten(Layer):
    kind = "Flatten"

    def forward(self, x, training):
        return T.reshape(x, (x.shape[0], -1))

    def output_shape(self, shape):
        return (int(np.prod(shape)),)


class GlobalAvgPool(Layer):
    kind = "GlobalAvgPool"

    def forward(self, x, training):
        return T.mean(x, (2, 3))

    def output_shape(self, shape):
        return (shape[0],)


class Linear(Layer):
    kind = "Linear"

    def __init__(self, fan_in, fan_out, rng):
        super().__init__()
        self.fan_in, self.fan_out = fan_in, fan_out
        bound = 1.0 / np.sqrt(fan_in)
        self.params["weight"] = Tensor(rng.uniform(-bound, bound, (fan_in, fan_out)), requires_grad=True)
        self.params["bias"] = Tensor(np.zeros(fan_out), requires_grad=True)

    def forward(self, x, training):
        return T.matmul(x, self.params["weight"]) + self.params["bias"]

    def output_shape(self, shape):
        if shape != (self.fan_in,):
            raise DimensionError(f"Linear expects ({self.fan_in},), got {shape}")
        return (self.fan_out,)

    def describe(self):
        return {"kind": self.kind, "fan_in": self.fan_in, "fan_out": self.fan_out}
