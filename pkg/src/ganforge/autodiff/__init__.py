from .conv import DimensionError, conv2d, conv2d_transpose, conv2d_weight_grad
from .functional import activation, batch_norm, cross_entropy, softmax
from .gradcheck import grad_check
from .io import load_tensor, save_tensor
from .tensor import (
    Tape,
    Tensor,
    as_tensor,
    backward,
    clip,
    concat,
    grad,
    leaky_relu,
    log,
    no_grad,
    relu,
    sigmoid,
    slice_axis,
    sqrt,
    tanh,
)

__all__ = [
    "DimensionError",
    "Tape",
    "Tensor",
    "activation",
    "as_tensor",
    "backward",
    "batch_norm",
    "clip",
    "concat",
    "conv2d",
    "conv2d_transpose",
    "conv2d_weight_grad",
    "cross_entropy",
    "grad",
    "grad_check",
    "leaky_relu",
    "load_tensor",
    "log",
    "no_grad",
    "relu",
    "save_tensor",
    "sigmoid",
    "slice_axis",
    "softmax",
    "sqrt",
    "tanh",
]
