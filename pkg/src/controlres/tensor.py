"""Dense-tensor engine with reverse-mode automatic differentiation.

Just enough machinery to train small CNNs on CPU: numpy arrays wrapped in a
:class:`Tensor` that records a dynamic graph, plus the handful of primitive
ops the restoration models need (conv2d, fully connected, relu, pixel
shuffle, elementwise arithmetic with broadcasting, reductions).

Conventions:
  * storage is float32 for training/inference; every op preserves the input
    dtype so the same graph code runs in float64 for gradient checking
  * nothing is mutated in place once it enters a graph; backward closures
    receive the output gradient and return fresh (or safely shared,
    never-mutated) arrays for their inputs
  * gradients accumulate additively when a value feeds several consumers
  * second-order gradients are not supported and are rejected explicitly
"""

from __future__ import annotations

import threading
from contextlib import contextmanager

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


class NumericsError(ArithmeticError):
    """A forward value left the finite range (NaN or Inf)."""


class _GradMode(threading.local):
    enabled = True


_grad_mode = _GradMode()


@contextmanager
def no_grad():
    """Disable graph recording on this thread (inference fast path)."""
    prev = _grad_mode.enabled
    _grad_mode.enabled = False
    try:
        yield
    finally:
        _grad_mode.enabled = prev


def _as_array(data):
    arr = np.asarray(data)
    if arr.dtype.kind != "f":
        arr = arr.astype(np.float32)
    return arr


class Tensor:
    """N-dimensional array participating in the autodiff graph.

    ``grad`` is a plain ndarray (same shape as ``data``) filled in by
    :func:`backward`; it is not itself differentiable.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward_fn", "_op")

    def __init__(self, data, requires_grad: bool = False):
        self.data = _as_array(data)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._backward_fn = None
        self._op = ""

    # -- graph plumbing ----------------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        """A new leaf sharing this tensor's values, cut from the graph."""
        return Tensor(self.data)

    def backward(self, create_graph: bool = False):
        backward(self, create_graph=create_graph)

    def _accumulate(self, g: np.ndarray):
        # never += : the incoming array may be a view into another grad
        self.grad = g if self.grad is None else self.grad + g

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}, requires_grad={self.requires_grad})"

    # -- arithmetic --------------------------------------------------------

    def _lift(self, other) -> "Tensor":
        if isinstance(other, Tensor):
            return other
        # keep scalar constants in our dtype so float32 graphs stay float32
        return Tensor(np.asarray(other, dtype=self.data.dtype))

    def __add__(self, other):
        return add(self, self._lift(other))

    def __radd__(self, other):
        return add(self._lift(other), self)

    def __sub__(self, other):
        return sub(self, self._lift(other))

    def __rsub__(self, other):
        return sub(self._lift(other), self)

    def __mul__(self, other):
        return mul(self, self._lift(other))

    def __rmul__(self, other):
        return mul(self._lift(other), self)

    def __truediv__(self, other):
        return div(self, self._lift(other))

    def __rtruediv__(self, other):
        return div(self._lift(other), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, exponent):
        return power(self, exponent)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis=axis, keepdims=keepdims)

    def abs(self):
        return tabs(self)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def relu(self):
        return relu(self)


def _make_node(data, parents, backward_fn, op: str) -> Tensor:
    out = Tensor(data)
    if _grad_mode.enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward_fn = backward_fn
        out._op = op
    return out


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``g`` down to ``shape`` (inverse of numpy broadcasting)."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


# -- elementwise ops -------------------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    def bk(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g, b.data.shape))

    return _make_node(a.data + b.data, (a, b), bk, "add")


def sub(a: Tensor, b: Tensor) -> Tensor:
    def bk(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(-g, b.data.shape))

    return _make_node(a.data - b.data, (a, b), bk, "sub")


def mul(a: Tensor, b: Tensor) -> Tensor:
    def bk(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * b.data, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * a.data, b.data.shape))

    return _make_node(a.data * b.data, (a, b), bk, "mul")


def div(a: Tensor, b: Tensor) -> Tensor:
    def bk(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g / b.data, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(-g * a.data / (b.data * b.data), b.data.shape))

    return _make_node(a.data / b.data, (a, b), bk, "div")


def neg(a: Tensor) -> Tensor:
    def bk(g):
        a._accumulate(-g)

    return _make_node(-a.data, (a,), bk, "neg")


def power(a: Tensor, exponent) -> Tensor:
    if not isinstance(exponent, (int, float)):
        raise TypeError("only scalar exponents are supported")
    e = float(exponent)

    def bk(g):
        a._accumulate(g * e * a.data ** (e - 1.0))

    return _make_node(a.data ** e, (a,), bk, f"pow{e}")


def tabs(a: Tensor) -> Tensor:
    def bk(g):
        a._accumulate(g * np.sign(a.data))

    return _make_node(np.abs(a.data), (a,), bk, "abs")


def relu(a: Tensor) -> Tensor:
    out_data = np.maximum(a.data, 0)

    def bk(g):
        a._accumulate(g * (out_data > 0))

    return _make_node(out_data, (a,), bk, "relu")


def leaky_relu(a: Tensor, negative_slope: float = 0.2) -> Tensor:
    s = float(negative_slope)
    pos = a.data > 0

    def bk(g):
        a._accumulate(g * np.where(pos, np.asarray(1.0, a.data.dtype), np.asarray(s, a.data.dtype)))

    return _make_node(np.where(pos, a.data, a.data * np.asarray(s, a.data.dtype)), (a,), bk, "leaky_relu")


# -- reductions and shape ops ----------------------------------------------


def _norm_axes(axis, ndim):
    if axis is None:
        return None
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(a % ndim for a in axis)


def tsum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    axes = _norm_axes(axis, a.data.ndim)

    def bk(g):
        if axes is not None and not keepdims:
            for ax in sorted(axes):
                g = np.expand_dims(g, ax)
        a._accumulate(np.broadcast_to(g, a.data.shape))

    return _make_node(a.data.sum(axis=axes, keepdims=keepdims), (a,), bk, "sum")


def tmean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    axes = _norm_axes(axis, a.data.ndim)
    if axes is None:
        count = a.data.size
    else:
        count = int(np.prod([a.data.shape[ax] for ax in axes]))

    def bk(g):
        if axes is not None and not keepdims:
            for ax in sorted(axes):
                g = np.expand_dims(g, ax)
        a._accumulate(np.broadcast_to(g / count, a.data.shape))

    return _make_node(a.data.mean(axis=axes, keepdims=keepdims), (a,), bk, "mean")


def reshape(a: Tensor, shape) -> Tensor:
    shape = tuple(shape)

    def bk(g):
        a._accumulate(g.reshape(a.data.shape))

    return _make_node(a.data.reshape(shape), (a,), bk, "reshape")


# -- neural net primitives ---------------------------------------------------


def fully_connected(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """x[N, Din] @ weight[Dout, Din]^T (+ bias[Dout])."""
    if x.data.ndim != 2 or weight.data.ndim != 2:
        raise ValueError("fully_connected expects 2-d input and weight")
    if x.data.shape[1] != weight.data.shape[1]:
        raise ValueError(
            f"input features {x.data.shape[1]} != weight features {weight.data.shape[1]}"
        )
    out_data = x.data @ weight.data.T
    if bias is not None:
        if bias.data.shape != (weight.data.shape[0],):
            raise ValueError("bias shape must be (Dout,)")
        out_data = out_data + bias.data
    parents = (x, weight) if bias is None else (x, weight, bias)

    def bk(g):
        if x.requires_grad:
            x._accumulate(g @ weight.data)
        if weight.requires_grad:
            weight._accumulate(g.T @ x.data)
        if bias is not None and bias.requires_grad:
            bias._accumulate(g.sum(axis=0))

    return _make_node(out_data, parents, bk, "fc")


def _im2col(xp: np.ndarray, k: int, stride: int, ho: int, wo: int) -> np.ndarray:
    # (N, C, Hp, Wp) -> (N*ho*wo, C*k*k); one copy via transpose+reshape
    v = sliding_window_view(xp, (k, k), axis=(2, 3))[:, :, ::stride, ::stride]
    return v.transpose(0, 2, 3, 1, 4, 5).reshape(xp.shape[0] * ho * wo, -1)


def conv2d(x: Tensor, weight: Tensor, bias: Tensor | None = None,
           stride: int = 1, pad: int = 0) -> Tensor:
    """2-d cross-correlation, NCHW layout, zero padding.

    x: [N, Cin, H, W], weight: [Cout, Cin, k, k], bias: [Cout].
    Output spatial size: floor((H + 2*pad - k) / stride) + 1.
    """
    if x.data.ndim != 4 or weight.data.ndim != 4:
        raise ValueError("conv2d expects 4-d input and weight")
    n, cin, h, w = x.data.shape
    cout, cin_w, k, k2 = weight.data.shape
    if k != k2:
        raise ValueError("only square kernels are supported")
    if k % 2 != 1:
        raise ValueError("kernel size must be odd")
    if cin != cin_w:
        raise ValueError(f"input channels {cin} != weight channels {cin_w}")
    if stride < 1:
        raise ValueError("stride must be positive")
    if pad < 0:
        raise ValueError("pad must be non-negative")
    if h + 2 * pad < k or w + 2 * pad < k:
        raise ValueError("kernel larger than padded input")
    if bias is not None and bias.data.shape != (cout,):
        raise ValueError("bias shape must be (Cout,)")

    ho = (h + 2 * pad - k) // stride + 1
    wo = (w + 2 * pad - k) // stride + 1
    if pad:
        xp = np.pad(x.data, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    else:
        xp = x.data
    cols = _im2col(xp, k, stride, ho, wo)
    out2 = cols @ weight.data.reshape(cout, -1).T
    if bias is not None:
        out2 += bias.data
    out_data = np.ascontiguousarray(
        out2.reshape(n, ho, wo, cout).transpose(0, 3, 1, 2)
    )
    parents = (x, weight) if bias is None else (x, weight, bias)

    def bk(g):
        g2 = g.transpose(0, 2, 3, 1).reshape(-1, cout)
        if weight.requires_grad:
            weight._accumulate((g2.T @ cols).reshape(weight.data.shape))
        if bias is not None and bias.requires_grad:
            bias._accumulate(g2.sum(axis=0))
        if x.requires_grad:
            gcols = (g2 @ weight.data.reshape(cout, -1)).reshape(n, ho, wo, cin, k, k)
            gxp = np.zeros((n, cin, h + 2 * pad, w + 2 * pad), dtype=g.dtype)
            for i in range(k):
                for j in range(k):
                    gxp[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride] += \
                        gcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
            x._accumulate(gxp[:, :, pad:pad + h, pad:pad + w] if pad else gxp)

    return _make_node(out_data, parents, bk, "conv2d")


def pixel_shuffle(x: Tensor, r: int) -> Tensor:
    """Depth-to-space: [N, C*r^2, H, W] -> [N, C, r*H, r*W].

    out[n, c, r*h + i, r*w + j] == x[n, c*r^2 + i*r + j, h, w]
    """
    if r < 1:
        raise ValueError("upscale factor must be >= 1")
    n, crr, h, w = x.data.shape
    if crr % (r * r) != 0:
        raise ValueError(f"channels {crr} not divisible by r^2={r * r}")
    c = crr // (r * r)
    out_data = np.ascontiguousarray(
        x.data.reshape(n, c, r, r, h, w).transpose(0, 1, 4, 2, 5, 3).reshape(n, c, h * r, w * r)
    )

    def bk(g):
        x._accumulate(
            g.reshape(n, c, h, r, w, r).transpose(0, 1, 3, 5, 2, 4).reshape(n, crr, h, w)
        )

    return _make_node(out_data, (x,), bk, "pixel_shuffle")


def pixel_unshuffle(x: Tensor, r: int) -> Tensor:
    """Space-to-depth, exact inverse of :func:`pixel_shuffle`."""
    if r < 1:
        raise ValueError("downscale factor must be >= 1")
    n, c, hr, wr = x.data.shape
    if hr % r != 0 or wr % r != 0:
        raise ValueError(f"spatial size ({hr},{wr}) not divisible by r={r}")
    h, w = hr // r, wr // r
    out_data = np.ascontiguousarray(
        x.data.reshape(n, c, h, r, w, r).transpose(0, 1, 3, 5, 2, 4).reshape(n, c * r * r, h, w)
    )

    def bk(g):
        x._accumulate(
            g.reshape(n, c, r, r, h, w).transpose(0, 1, 4, 2, 5, 3).reshape(n, c, hr, wr)
        )

    return _make_node(out_data, (x,), bk, "pixel_unshuffle")


# -- backward pass -----------------------------------------------------------


def backward(loss: Tensor, leaves=None, create_graph: bool = False):
    """Reverse-mode pass from a scalar ``loss``.

    Fills ``.grad`` on every reachable tensor with ``requires_grad``; tensors
    listed in ``leaves`` that the loss does not depend on get zero gradients.
    """
    if create_graph:
        raise NotImplementedError("double-backward is not supported by this engine")
    if loss.data.size != 1:
        raise ValueError("backward requires a scalar loss")

    # iterative post-order topological sort (consumers after producers)
    topo = []
    visited = set()
    stack = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in visited:
                stack.append((p, False))

    loss._accumulate(np.ones_like(loss.data))
    for node in reversed(topo):
        if node._backward_fn is not None and node.grad is not None:
            node._backward_fn(node.grad)

    if leaves is not None:
        for leaf in leaves:
            if leaf.requires_grad and leaf.grad is None:
                leaf.grad = np.zeros_like(leaf.data)


def check_finite(t: Tensor, what: str = "tensor"):
    if not np.isfinite(t.data).all():
        raise NumericsError(f"non-finite values in {what}")
    return t
