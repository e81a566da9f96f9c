"""Dense float64 tensors with reverse-mode differentiation.

Every operation that touches a tensor with ``requires_grad`` records a
:class:`Node`. Nodes carry a global sequence number, so the nodes reachable
from any output, sorted by that number, are already in topological order.
Backward rules are written in terms of tensor operations themselves, which
makes second-order gradients (needed by the gradient penalty) available by
passing ``create_graph=True``.
"""

from __future__ import annotations

import itertools
import threading
from contextlib import contextmanager
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

_seq = itertools.count()
_local = threading.local()


def is_grad_enabled() -> bool:
    return getattr(_local, "enabled", True)


@contextmanager
def set_grad_enabled(flag: bool):
    prev = is_grad_enabled()
    _local.enabled = flag
    try:
        yield
    finally:
        _local.enabled = prev


def no_grad():
    return set_grad_enabled(False)


class Node:
    __slots__ = ("seq", "op", "inputs", "backward")

    def __init__(self, op: str, inputs: tuple, backward: Callable):
        self.seq = next(_seq)
        self.op = op
        self.inputs = inputs
        self.backward = backward

    def __repr__(self):
        return f"Node({self.seq}, {self.op})"


class Tensor:
    """A float64 array plus an optional link into the gradient graph."""

    __slots__ = ("data", "requires_grad", "grad", "node", "name", "__weakref__")
    __array_priority__ = 100.0

    def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None):
        if isinstance(data, Tensor):
            data = data.data
        arr = np.asarray(data, dtype=np.float64)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None
        self.node: Optional[Node] = None
        self.name = name

    # -- basic properties -------------------------------------------------
    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self):
        tag = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{tag})"

    def __len__(self):
        return self.data.shape[0]

    # -- operators --------------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, exponent):
        return power(self, exponent)

    def __matmul__(self, other):
        return matmul(self, other)

    def sum(self, axis=None, keepdims=False):
        return sum_(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis, keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes or None)

    def exp(self):
        return exp(self)

    def log(self):
        return log(self)

    def sqrt(self):
        return sqrt(self)

    def tanh(self):
        return tanh(self)

    def sigmoid(self):
        return sigmoid(self)

    def relu(self):
        return relu(self)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def make_op(data: np.ndarray, inputs: Sequence[Tensor], backward: Callable, op: str) -> Tensor:
    """Wrap ``data`` as the output of ``op``; record a node if any input needs grad."""
    out = Tensor(data)
    if is_grad_enabled() and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        out.node = Node(op, tuple(inputs), backward)
    return out


# ---------------------------------------------------------------------------
# broadcasting helpers


def sum_to(x: Tensor, shape: tuple) -> Tensor:
    """Sum ``x`` down to ``shape`` (inverse of numpy broadcasting)."""
    shape = tuple(shape)
    if x.shape == shape:
        return x
    src = x.shape
    lead = len(src) - len(shape)
    axes = tuple(range(lead)) + tuple(
        i + lead for i, d in enumerate(shape) if d == 1 and src[i + lead] != 1
    )
    data = x.data.sum(axis=axes, keepdims=True)
    if lead:
        data = data.reshape(data.shape[lead:])
    data = data.reshape(shape)

    def backward(g):
        return (broadcast_to(g, src),)

    return make_op(data, (x,), backward, "sum_to")


def broadcast_to(x: Tensor, shape: tuple) -> Tensor:
    shape = tuple(shape)
    if x.shape == shape:
        return x
    src = x.shape
    data = np.ascontiguousarray(np.broadcast_to(x.data, shape))

    def backward(g):
        return (sum_to(g, src),)

    return make_op(data, (x,), backward, "broadcast_to")


# ---------------------------------------------------------------------------
# elementwise arithmetic


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    sa, sb = a.shape, b.shape

    def backward(g):
        return sum_to(g, sa), sum_to(g, sb)

    return make_op(a.data + b.data, (a, b), backward, "add")


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    sa, sb = a.shape, b.shape

    def backward(g):
        return sum_to(g, sa), sum_to(neg(g), sb)

    return make_op(a.data - b.data, (a, b), backward, "sub")


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    sa, sb = a.shape, b.shape

    def backward(g):
        ga = sum_to(mul(g, b), sa) if a.requires_grad else None
        gb = sum_to(mul(g, a), sb) if b.requires_grad else None
        return ga, gb

    return make_op(a.data * b.data, (a, b), backward, "mul")


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    sa, sb = a.shape, b.shape

    def backward(g):
        ga = sum_to(div(g, b), sa) if a.requires_grad else None
        gb = sum_to(neg(div(mul(g, a), mul(b, b))), sb) if b.requires_grad else None
        return ga, gb

    return make_op(a.data / b.data, (a, b), backward, "div")


def neg(a) -> Tensor:
    a = as_tensor(a)
    return make_op(-a.data, (a,), lambda g: (neg(g),), "neg")


def power(a, exponent: float) -> Tensor:
    a = as_tensor(a)
    p = float(exponent)

    def backward(g):
        if p == 2.0:
            return (mul(g, mul(a, 2.0)),)
        return (mul(g, mul(power(a, p - 1.0), p)),)

    return make_op(a.data ** p, (a,), backward, "pow")


def exp(a) -> Tensor:
    a = as_tensor(a)
    out_holder = []

    def backward(g):
        return (mul(g, out_holder[0]),)

    out = make_op(np.exp(a.data), (a,), backward, "exp")
    out_holder.append(out)
    return out


def log(a) -> Tensor:
    a = as_tensor(a)
    return make_op(np.log(a.data), (a,), lambda g: (div(g, a),), "log")


def sqrt(a) -> Tensor:
    a = as_tensor(a)
    holder = []

    def backward(g):
        return (div(mul(g, 0.5), holder[0]),)

    out = make_op(np.sqrt(a.data), (a,), backward, "sqrt")
    holder.append(out)
    return out


def tanh(a) -> Tensor:
    a = as_tensor(a)
    holder = []

    def backward(g):
        y = holder[0]
        return (mul(g, sub(1.0, mul(y, y))),)

    out = make_op(np.tanh(a.data), (a,), backward, "tanh")
    holder.append(out)
    return out


def _stable_sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    holder = []

    def backward(g):
        y = holder[0]
        return (mul(g, mul(y, sub(1.0, y))),)

    out = make_op(_stable_sigmoid(a.data), (a,), backward, "sigmoid")
    holder.append(out)
    return out


def relu(a) -> Tensor:
    a = as_tensor(a)
    mask = (a.data > 0).astype(np.float64)
    return make_op(a.data * mask, (a,), lambda g: (mul(g, mask),), "relu")


def leaky_relu(a, slope: float = 0.2) -> Tensor:
    if not 0.0 < slope < 1.0:
        raise ValueError(f"leaky_relu slope must lie in (0, 1), got {slope}")
    a = as_tensor(a)
    factor = np.where(a.data > 0, 1.0, slope)
    return make_op(a.data * factor, (a,), lambda g: (mul(g, factor),), "leaky_relu")


def clip(a, lo: float, hi: float) -> Tensor:
    """Clamp values; the gradient is zero wherever the clamp is active."""
    a = as_tensor(a)
    mask = ((a.data >= lo) & (a.data <= hi)).astype(np.float64)
    return make_op(np.clip(a.data, lo, hi), (a,), lambda g: (mul(g, mask),), "clip")


# ---------------------------------------------------------------------------
# reductions and shape manipulation


def _norm_axes(axis, ndim):
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(sorted(a % ndim for a in axis))


def sum_(a, axis=None, keepdims=False) -> Tensor:
    a = as_tensor(a)
    axes = _norm_axes(axis, a.ndim)
    src = a.shape
    kept = tuple(1 if i in axes else d for i, d in enumerate(src))

    def backward(g):
        return (broadcast_to(reshape(g, kept), src),)

    return make_op(a.data.sum(axis=axes, keepdims=keepdims), (a,), backward, "sum")


def mean(a, axis=None, keepdims=False) -> Tensor:
    a = as_tensor(a)
    axes = _norm_axes(axis, a.ndim)
    count = 1
    for i in axes:
        count *= a.shape[i]
    return mul(sum_(a, axes, keepdims), 1.0 / count)


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    src = a.shape
    return make_op(a.data.reshape(shape), (a,), lambda g: (reshape(g, src),), "reshape")


def transpose(a, axes=None) -> Tensor:
    a = as_tensor(a)
    if axes is None:
        axes = tuple(reversed(range(a.ndim)))
    inv = tuple(np.argsort(axes))
    return make_op(
        np.ascontiguousarray(a.data.transpose(axes)), (a,), lambda g: (transpose(g, inv),), "transpose"
    )


def concat(tensors: Sequence, axis: int = 0) -> Tensor:
    parts = [as_tensor(t) for t in tensors]
    bounds = np.cumsum([0] + [t.shape[axis] for t in parts])

    def backward(g):
        return tuple(
            slice_axis(g, int(bounds[i]), int(bounds[i + 1]), axis) if t.requires_grad else None
            for i, t in enumerate(parts)
        )

    return make_op(np.concatenate([t.data for t in parts], axis=axis), parts, backward, "concat")


def slice_axis(a, start: int, stop: int, axis: int = 0) -> Tensor:
    """``a[start:stop]`` along ``axis``."""
    a = as_tensor(a)
    index = [slice(None)] * a.ndim
    index[axis] = slice(start, stop)

    def backward(g):
        before = list(a.shape)
        before[axis] = start
        after = list(a.shape)
        after[axis] = a.shape[axis] - stop
        return (concat([np.zeros(before), g, np.zeros(after)], axis),)

    return make_op(np.ascontiguousarray(a.data[tuple(index)]), (a,), backward, "slice")


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError(f"matmul expects 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul inner dimensions differ: {a.shape[1]} vs {b.shape[0]}")

    def backward(g):
        ga = matmul(g, transpose(b)) if a.requires_grad else None
        gb = matmul(transpose(a), g) if b.requires_grad else None
        return ga, gb

    return make_op(a.data @ b.data, (a, b), backward, "matmul")


def logsumexp(a, axis: int = -1, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    shift = np.max(a.data, axis=axis, keepdims=True)
    out = add(log(sum_(exp(sub(a, shift)), axis, keepdims=True)), shift)
    if not keepdims:
        out = reshape(out, np.squeeze(out.data, axis=axis).shape)
    return out


def log_softmax(a, axis: int = -1) -> Tensor:
    return sub(a, logsumexp(a, axis, keepdims=True))


# ---------------------------------------------------------------------------
# graph traversal and the backward pass


class Tape:
    """The recorded nodes reachable from a set of roots, oldest first.

    Sequence numbers are assigned at record time, so sorting by them gives a
    valid topological order: a node's inputs always precede it.
    """

    def __init__(self, roots: Iterable[Tensor]):
        seen = set()
        tensors = []
        stack = [t for t in roots if t.node is not None]
        while stack:
            t = stack.pop()
            if id(t) in seen:
                continue
            seen.add(id(t))
            tensors.append(t)
            for inp in t.node.inputs:
                if inp.node is not None and id(inp) not in seen:
                    stack.append(inp)
        tensors.sort(key=lambda t: t.node.seq)
        self.tensors = tensors

    @property
    def nodes(self):
        return [t.node for t in self.tensors]

    def __len__(self):
        return len(self.tensors)

    def run(self, seeds: dict, create_graph: bool = False) -> dict:
        """Propagate gradients from ``seeds`` ({id(tensor): (tensor, grad)}).

        Returns ``{id(tensor): (tensor, grad)}`` for every tensor that received
        a gradient, leaves included.
        """
        grads = dict(seeds)
        with set_grad_enabled(create_graph):
            for t in reversed(self.tensors):
                entry = grads.get(id(t))
                if entry is None:
                    continue
                g = entry[1]
                in_grads = t.node.backward(g)
                for inp, gi in zip(t.node.inputs, in_grads):
                    if gi is None or not inp.requires_grad:
                        continue
                    prev = grads.get(id(inp))
                    grads[id(inp)] = (inp, gi if prev is None else add(prev[1], gi))
        return grads


def grad(
    outputs,
    inputs: Sequence[Tensor],
    grad_outputs=None,
    create_graph: bool = False,
) -> list:
    """Gradients of ``outputs`` with respect to ``inputs`` as tensors.

    Inputs the outputs do not depend on receive zero tensors.
    """
    if isinstance(outputs, Tensor):
        outputs = [outputs]
    if grad_outputs is None:
        grad_outputs = [None] * len(outputs)
    elif isinstance(grad_outputs, Tensor):
        grad_outputs = [grad_outputs]
    seeds = {}
    for out, g in zip(outputs, grad_outputs):
        if g is None:
            if out.size != 1:
                raise ValueError(f"grad of non-scalar output {out.shape} needs grad_outputs")
            g = Tensor(np.ones_like(out.data))
        seeds[id(out)] = (out, as_tensor(g))
    tape = Tape(outputs)
    result = tape.run(seeds, create_graph=create_graph)
    grads = []
    for t in inputs:
        entry = result.get(id(t))
        if entry is None:
            grads.append(Tensor(np.zeros_like(t.data)))
        else:
            g = entry[1]
            if not create_graph:
                g = Tensor(g.data)
            grads.append(g)
    return grads


def backward(loss: Tensor, inputs: Optional[Sequence[Tensor]] = None) -> None:
    """Accumulate d(loss)/d(leaf) into ``.grad`` of every leaf that needs it.

    When ``inputs`` is given, those tensors always end with a ``.grad``
    (zeros when the loss does not depend on them).
    """
    if loss.size != 1:
        raise ValueError(f"backward needs a scalar loss, got shape {loss.shape}")
    tape = Tape([loss])
    result = tape.run({id(loss): (loss, Tensor(np.ones_like(loss.data)))})
    for t, g in result.values():
        if t.node is None and t.requires_grad:
            t.grad = g.data.copy() if t.grad is None else t.grad + g.data
    if inputs is not None:
        for t in inputs:
            if t.grad is None:
                t.grad = np.zeros_like(t.data)
