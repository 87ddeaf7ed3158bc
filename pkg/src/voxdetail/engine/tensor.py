"""Reverse-mode autodiff over dense float32 arrays.

Deliberately minimal: exactly the operator set the refinement networks
need. Values are float32; loss reductions accumulate in float64.
"""

from __future__ import annotations

import numpy as np

from ..errors import ParameterError, ShapeError
from . import kernels


class Tensor:
    """A float32 array plus optional participation in the gradient tape."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward_fn")

    def __init__(self, data, requires_grad: bool = False, _parents=(), _backward_fn=None):
        arr = np.asarray(data, dtype=np.float32)
        self.data = arr if arr.flags["C_CONTIGUOUS"] else np.ascontiguousarray(arr)
        self.grad = None
        self.requires_grad = bool(requires_grad) or any(p.requires_grad for p in _parents)
        self._parents = _parents if self.requires_grad else ()
        self._backward_fn = _backward_fn if self.requires_grad else None

    @property
    def shape(self):
        return self.data.shape

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def _accumulate(self, g: np.ndarray):
        if self.grad is None:
            self.grad = g.astype(np.float32, copy=True)
        else:
            self.grad += g

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, np.float32))


def backward(loss: Tensor) -> None:
    """Propagate d(loss)/d(leaf) to every requires_grad leaf of the tape."""
    if loss.data.size != 1:
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.data.shape}")
    order: list[Tensor] = []
    seen = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen or not node.requires_grad:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            stack.append((p, False))
    loss._accumulate(np.ones_like(loss.data))
    for node in reversed(order):
        if node._backward_fn is not None:
            node._backward_fn(node.grad)


def zero_grads(tensors) -> None:
    for t in tensors:
        t.grad = None


# ---------------------------------------------------------------------------
# Operators


def conv3d(x: Tensor, w: Tensor, b: Tensor, stride: int = 1, pad=0) -> Tensor:
    """3-D cross-correlation; input [Cin,D,H,W], weight [Cout,Cin,k,k,k]."""
    if x.data.ndim != 4 or w.data.ndim != 5:
        raise ShapeError(f"conv3d wants 4-D input and 5-D weight, got {x.shape}, {w.shape}")
    if x.shape[0] != w.shape[1]:
        raise ShapeError(f"channel mismatch: input {x.shape[0]} vs weight {w.shape[1]}")
    if not (w.shape[2] == w.shape[3] == w.shape[4]):
        raise ShapeError(f"kernel must be cubic, got {w.shape[2:]}")
    if b.shape != (w.shape[0],):
        raise ShapeError(f"bias shape {b.shape} does not match {w.shape[0]} filters")
    pads = kernels.normalize_padding(pad, w.shape[2])
    out_data = kernels.conv3d_forward(x.data, w.data, b.data, stride, pads)
    out = Tensor(out_data, _parents=(x, w, b))

    def run(g):
        gx, gw, gb = kernels.conv3d_backward(
            x.data, w.data, stride, pads, g,
            need_gx=x.requires_grad, need_gw=w.requires_grad,
        )
        if gx is not None:
            x._accumulate(gx)
        if gw is not None:
            w._accumulate(gw)
        if b.requires_grad:
            b._accumulate(gb)

    out._backward_fn = run if out.requires_grad else None
    return out


def leaky_relu(x: Tensor, slope: float = 0.02) -> Tensor:
    out = Tensor(np.where(x.data > 0, x.data, np.float32(slope) * x.data), _parents=(x,))

    def run(g):
        x._accumulate(np.where(x.data > 0, g, np.float32(slope) * g))

    out._backward_fn = run if out.requires_grad else None
    return out


def sigmoid(x: Tensor) -> Tensor:
    y = 1.0 / (1.0 + np.exp(-x.data.astype(np.float64)))
    out = Tensor(y, _parents=(x,))

    def run(g):
        yd = out.data
        x._accumulate(g * yd * (1.0 - yd))

    out._backward_fn = run if out.requires_grad else None
    return out


def add(a: Tensor, b) -> Tensor:
    if isinstance(b, Tensor):
        if a.shape != b.shape:
            raise ShapeError(f"add shape mismatch: {a.shape} vs {b.shape}")
        out = Tensor(a.data + b.data, _parents=(a, b))

        def run(g):
            if a.requires_grad:
                a._accumulate(g)
            if b.requires_grad:
                b._accumulate(g)

    else:
        out = Tensor(a.data + np.float32(b), _parents=(a,))

        def run(g):
            a._accumulate(g)

    out._backward_fn = run if out.requires_grad else None
    return out


def mul(a: Tensor, b) -> Tensor:
    if isinstance(b, Tensor):
        if a.shape != b.shape:
            raise ShapeError(f"mul shape mismatch: {a.shape} vs {b.shape}")
        out = Tensor(a.data * b.data, _parents=(a, b))

        def run(g):
            if a.requires_grad:
                a._accumulate(g * b.data)
            if b.requires_grad:
                b._accumulate(g * a.data)

    else:
        s = np.float32(b)
        out = Tensor(a.data * s, _parents=(a,))

        def run(g):
            a._accumulate(g * s)

    out._backward_fn = run if out.requires_grad else None
    return out


def concat_channels(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape[1:] != b.data.shape[1:]:
        raise ShapeError(f"spatial dims differ: {a.shape} vs {b.shape}")
    na = a.shape[0]
    out = Tensor(np.concatenate([a.data, b.data], axis=0), _parents=(a, b))

    def run(g):
        if a.requires_grad:
            a._accumulate(g[:na])
        if b.requires_grad:
            b._accumulate(g[na:])

    out._backward_fn = run if out.requires_grad else None
    return out


def broadcast_scalar_channels(code: Tensor, spatial) -> Tensor:
    """Expand a [C] vector into a constant [C, D, H, W] field."""
    if code.data.ndim != 1:
        raise ShapeError(f"code must be a vector, got shape {code.shape}")
    d, h, w = spatial
    data = np.broadcast_to(code.data[:, None, None, None], (code.shape[0], d, h, w))
    out = Tensor(np.ascontiguousarray(data), _parents=(code,))

    def run(g):
        code._accumulate(g.sum(axis=(1, 2, 3), dtype=np.float64).astype(np.float32))

    out._backward_fn = run if out.requires_grad else None
    return out


def upsample_nearest2(x: Tensor) -> Tensor:
    """Double every spatial dim by replication; adjoint sums each 2^3 block."""
    if x.data.ndim != 4:
        raise ShapeError(f"expected [C,D,H,W], got {x.shape}")
    v = x.data
    for axis in (1, 2, 3):
        v = np.repeat(v, 2, axis=axis)
    out = Tensor(v, _parents=(x,))

    def run(g):
        c, d, h, w = x.data.shape
        gsum = g.reshape(c, d, 2, h, 2, w, 2).sum(axis=(2, 4, 6))
        x._accumulate(gsum)

    out._backward_fn = run if out.requires_grad else None
    return out


def channel(x: Tensor, idx: int) -> Tensor:
    """Select one channel of a [C, D, H, W] tensor as [1, D, H, W]."""
    if not 0 <= idx < x.shape[0]:
        raise ShapeError(f"channel {idx} out of range for {x.shape}")
    out = Tensor(x.data[idx : idx + 1].copy(), _parents=(x,))

    def run(g):
        full = np.zeros_like(x.data)
        full[idx : idx + 1] = g
        x._accumulate(full)

    out._backward_fn = run if out.requires_grad else None
    return out


def take_row(m: Tensor, idx: int) -> Tensor:
    """Select row idx of an [N, K] matrix as a [K] vector."""
    if m.data.ndim != 2 or not 0 <= idx < m.shape[0]:
        raise ShapeError(f"row {idx} invalid for shape {m.shape}")
    out = Tensor(m.data[idx].copy(), _parents=(m,))

    def run(g):
        full = np.zeros_like(m.data)
        full[idx] = g
        m._accumulate(full)

    out._backward_fn = run if out.requires_grad else None
    return out


def masked_mse(pred: Tensor, target, mask, normalizer: float) -> Tensor:
    """||(pred - target) * mask||_2^2 / normalizer, gradient to pred only."""
    if normalizer <= 0:
        raise ParameterError(f"normalizer must be positive, got {normalizer}")
    t = target.data if isinstance(target, Tensor) else np.asarray(target, np.float32)
    m = mask.data if isinstance(mask, Tensor) else np.asarray(mask, np.float32)
    if t.shape != pred.shape or m.shape != pred.shape:
        raise ShapeError(f"masked_mse shapes differ: {pred.shape}, {t.shape}, {m.shape}")
    diff = (pred.data - t) * m
    val = np.square(diff, dtype=np.float64).sum() / float(normalizer)
    out = Tensor(np.float32(val), _parents=(pred,))

    def run(g):
        pred._accumulate((np.float64(g) * 2.0 / normalizer * diff * m).astype(np.float32))

    out._backward_fn = run if out.requires_grad else None
    return out
