"""Strided 2-D convolution, its adjoint, and its weight gradient.

The three primitives close under differentiation: the derivative of each one
is expressed with the other two, so gradients of gradients work.

Layout is NCHW. A convolution kernel is ``out x in x k x k``. The transposed
convolution reuses the same array, read as ``in_T x out_T x k x k``.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import as_strided

from .tensor import Tensor, as_tensor, make_op

#: "im2col" (patch matrix + one BLAS call) or "loops" (one accumulation per tap)
DEFAULT_METHOD = "im2col"


class DimensionError(ValueError):
    pass


def conv_output_size(size: int, k: int, stride: int, padding: int) -> int:
    return (size + 2 * padding - k) // stride + 1


def conv_transpose_output_size(size: int, k: int, stride: int, padding: int) -> int:
    return (size - 1) * stride - 2 * padding + k


def _check_conv(x: np.ndarray, w: np.ndarray, stride: int, padding: int):
    if x.ndim != 4:
        raise DimensionError(f"conv input must be N x C x H x W, got shape {x.shape}")
    if w.ndim != 4 or w.shape[2] != w.shape[3]:
        raise DimensionError(f"conv kernel must be O x C x k x k, got shape {w.shape}")
    if x.shape[1] != w.shape[1]:
        raise DimensionError(
            f"channel axis mismatch: input axis 1 has {x.shape[1]}, kernel axis 1 has {w.shape[1]}"
        )
    if stride < 1 or padding < 0:
        raise DimensionError(f"invalid stride={stride} / padding={padding}")
    k = w.shape[2]
    ho = conv_output_size(x.shape[2], k, stride, padding)
    wo = conv_output_size(x.shape[3], k, stride, padding)
    if ho < 1 or wo < 1:
        raise DimensionError(
            f"spatial axes (2, 3) of size {x.shape[2:]} too small for k={k}, padding={padding}"
        )
    return ho, wo


def _pad(x: np.ndarray, p: int) -> np.ndarray:
    if p == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))


def _patches(xp: np.ndarray, k: int, s: int, ho: int, wo: int) -> np.ndarray:
    """Read-only view N x C x ho x wo x k x k of the padded input."""
    n, c = xp.shape[:2]
    sn, sc, sh, sw = xp.strides
    return as_strided(xp, (n, c, ho, wo, k, k), (sn, sc, sh * s, sw * s, sh, sw), writeable=False)


def _conv_forward(x, w, s, p, method):
    ho, wo = _check_conv(x, w, s, p)
    k = w.shape[2]
    xp = np.ascontiguousarray(_pad(x, p))
    if method == "im2col":
        cols = _patches(xp, k, s, ho, wo)
        out = np.tensordot(cols, w, axes=([1, 4, 5], [1, 2, 3]))  # N, ho, wo, O
        return np.ascontiguousarray(out.transpose(0, 3, 1, 2))
    if method == "loops":
        out = np.zeros((x.shape[0], w.shape[0], ho, wo))
        for u in range(k):
            for v in range(k):
                tap = xp[:, :, u : u + s * (ho - 1) + 1 : s, v : v + s * (wo - 1) + 1 : s]
                out += np.tensordot(tap, w[:, :, u, v], axes=([1], [1])).transpose(0, 3, 1, 2)
        return out
    raise ValueError(f"unknown convolution method {method!r}")


def _col2im(y, w, s, p, out_hw):
    """Adjoint of ``_conv_forward`` for an input of spatial size ``out_hw``."""
    if y.ndim != 4 or w.ndim != 4:
        raise DimensionError(f"expected 4-D operands, got {y.shape} and {w.shape}")
    if y.shape[1] != w.shape[0]:
        raise DimensionError(
            f"channel axis mismatch: input axis 1 has {y.shape[1]}, kernel axis 0 has {w.shape[0]}"
        )
    n, _, h, wd = y.shape
    k = w.shape[2]
    oh, ow = out_hw
    if oh < 1 or ow < 1:
        raise DimensionError(f"transposed convolution output size {out_hw} is empty")
    if (h - 1) * s + k > oh + 2 * p or (wd - 1) * s + k > ow + 2 * p:
        raise DimensionError(f"output size {out_hw} too small for input {y.shape[2:]}")
    c = w.shape[1]
    buf = np.zeros((c, n, oh + 2 * p, ow + 2 * p))
    cols = np.tensordot(w, y, axes=([0], [1]))  # C, k, k, N, h, w
    for u in range(k):
        for v in range(k):
            buf[:, :, u : u + s * (h - 1) + 1 : s, v : v + s * (wd - 1) + 1 : s] += cols[:, u, v]
    return np.ascontiguousarray(buf[:, :, p : p + oh, p : p + ow].transpose(1, 0, 2, 3))


def _weight_grad(x, gy, s, p, k):
    n, c, h, wd = x.shape
    ho, wo = gy.shape[2], gy.shape[3]
    xp = np.ascontiguousarray(_pad(x, p))
    cols = _patches(xp, k, s, ho, wo)
    return np.tensordot(gy, cols, axes=([0, 2, 3], [0, 2, 3]))  # O, C, k, k


def conv2d(x, kernel, stride: int = 1, padding: int = 0, method: str | None = None) -> Tensor:
    """Cross-correlation ``out[n,o,i,j] = sum x[n,c,i*s-p+u,j*s-p+v] * K[o,c,u,v]``."""
    x, kernel = as_tensor(x), as_tensor(kernel)
    s, p = int(stride), int(padding)
    data = _conv_forward(x.data, kernel.data, s, p, method or DEFAULT_METHOD)
    in_hw = x.shape[2:]
    k = kernel.shape[2]

    def backward(g):
        gx = _conv_input_grad(g, kernel, s, p, in_hw) if x.requires_grad else None
        gw = conv2d_weight_grad(x, g, s, p, k) if kernel.requires_grad else None
        return gx, gw

    return make_op(data, (x, kernel), backward, "conv2d")


def _conv_input_grad(y, kernel, s, p, out_hw) -> Tensor:
    y, kernel = as_tensor(y), as_tensor(kernel)
    data = _col2im(y.data, kernel.data, s, p, tuple(out_hw))

    def backward(g):
        gy = conv2d(g, kernel, s, p) if y.requires_grad else None
        gw = conv2d_weight_grad(g, y, s, p, kernel.shape[2]) if kernel.requires_grad else None
        return gy, gw

    return make_op(data, (y, kernel), backward, "conv2d_transpose")


def conv2d_transpose(
    x, kernel, stride: int = 1, padding: int = 0, output_size: tuple | None = None
) -> Tensor:
    """Transposed convolution: the adjoint of :func:`conv2d` in its input.

    ``kernel`` is ``Cin x Cout x k x k``. The default output size is
    ``(H - 1) * stride - 2 * padding + k``.
    """
    x, kernel = as_tensor(x), as_tensor(kernel)
    if x.ndim != 4:
        raise DimensionError(f"conv_transpose input must be N x C x H x W, got shape {x.shape}")
    if kernel.ndim != 4 or kernel.shape[2] != kernel.shape[3]:
        raise DimensionError(f"conv_transpose kernel must be Cin x Cout x k x k, got {kernel.shape}")
    if output_size is None:
        k = kernel.shape[2]
        output_size = tuple(conv_transpose_output_size(d, k, stride, padding) for d in x.shape[2:])
    return _conv_input_grad(x, kernel, int(stride), int(padding), output_size)


def conv2d_weight_grad(x, gy, stride: int, padding: int, k: int) -> Tensor:
    """Gradient of ``<conv2d(x, K), gy>`` with respect to ``K``."""
    x, gy = as_tensor(x), as_tensor(gy)
    s, p = int(stride), int(padding)
    data = _weight_grad(x.data, gy.data, s, p, k)
    in_hw = x.shape[2:]

    def backward(g):
        gx = _conv_input_grad(gy, g, s, p, in_hw) if x.requires_grad else None
        ggy = conv2d(x, g, s, p) if gy.requires_grad else None
        return gx, ggy

    return make_op(data, (x, gy), backward, "conv2d_weight_grad")
