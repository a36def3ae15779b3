"""Differentiable operations on ``Tensor``.

Every function here computes its forward result with NumPy, validates shapes
and finiteness, and registers a backward closure on the active tape when an
input requires gradients.

Broadcasting is deliberately narrow: operands must have equal shapes, one of
them must be a scalar, or the smaller shape must be a suffix of the larger one
(broadcast over leading batch dimensions). Per-channel conditioning of
``[B, C, H, W]`` feature maps goes through ``add_channel`` instead.
"""

from __future__ import annotations

from collections.abc import Sequence
import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from numpy.typing import ArrayLike

from dense_face.exceptions import ConfigError, ContractError, DimensionError, NumericError

from .tensor import Tensor

Operand = Tensor | float | int


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------


def _constant(value: ArrayLike, dtype: np.dtype[np.floating]) -> Tensor:
    return Tensor(np.asarray(value, dtype=dtype))


def _pair(a: Operand, b: Operand) -> tuple[Tensor, Tensor]:
    if isinstance(a, Tensor) and isinstance(b, Tensor):
        if a.dtype != b.dtype:
            msg = f"dtype mismatch: {a.dtype} vs {b.dtype}"
            raise ContractError(msg)
        return a, b
    if isinstance(a, Tensor):
        return a, _constant(b, a.dtype)
    if isinstance(b, Tensor):
        return _constant(a, b.dtype), b
    f64 = np.dtype(np.float64)
    return _constant(a, f64), _constant(b, f64)


def _broadcast_shape(op: str, sa: tuple[int, ...], sb: tuple[int, ...]) -> tuple[int, ...]:
    if sa == sb:
        return sa
    if not sa:
        return sb
    if not sb:
        return sa
    if len(sa) < len(sb) and sb[-len(sa) :] == sa:
        return sb
    if len(sb) < len(sa) and sa[-len(sb) :] == sb:
        return sa
    msg = f"{op}: incompatible shapes {sa} and {sb}"
    raise DimensionError(msg)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    return grad.reshape(shape)


def _norm_axis(axis: int, ndim: int) -> int:
    if not -ndim <= axis < ndim:
        msg = f"axis {axis} out of range for {ndim}-d tensor"
        raise DimensionError(msg)
    return axis % ndim


# ---------------------------------------------------------------------------
# Elementwise arithmetic
# ---------------------------------------------------------------------------


def add(a: Operand, b: Operand) -> Tensor:
    """Elementwise sum with scalar or leading-batch broadcasting."""
    ta, tb = _pair(a, b)
    _broadcast_shape("add", ta.shape, tb.shape)

    def backward(g: np.ndarray) -> tuple[np.ndarray | None, np.ndarray | None]:
        return (
            _unbroadcast(g, ta.shape) if ta.requires_grad else None,
            _unbroadcast(g, tb.shape) if tb.requires_grad else None,
        )

    return Tensor._from_op("add", ta.data + tb.data, (ta, tb), backward, ta.dtype)


def sub(a: Operand, b: Operand) -> Tensor:
    """Elementwise difference with the same broadcasting rule as ``add``."""
    ta, tb = _pair(a, b)
    _broadcast_shape("sub", ta.shape, tb.shape)

    def backward(g: np.ndarray) -> tuple[np.ndarray | None, np.ndarray | None]:
        return (
            _unbroadcast(g, ta.shape) if ta.requires_grad else None,
            _unbroadcast(-g, tb.shape) if tb.requires_grad else None,
        )

    return Tensor._from_op("sub", ta.data - tb.data, (ta, tb), backward, ta.dtype)


def mul(a: Operand, b: Operand) -> Tensor:
    """Elementwise product."""
    ta, tb = _pair(a, b)
    _broadcast_shape("mul", ta.shape, tb.shape)

    def backward(g: np.ndarray) -> tuple[np.ndarray | None, np.ndarray | None]:
        return (
            _unbroadcast(g * tb.data, ta.shape) if ta.requires_grad else None,
            _unbroadcast(g * ta.data, tb.shape) if tb.requires_grad else None,
        )

    return Tensor._from_op("mul", ta.data * tb.data, (ta, tb), backward, ta.dtype)


def scale(x: Tensor, factor: float) -> Tensor:
    """Multiply by a Python scalar."""

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        return (g * factor,)

    return Tensor._from_op("scale", x.data * factor, (x,), backward, x.dtype)


def exp(x: Tensor) -> Tensor:
    with np.errstate(over="ignore"):
        y = np.exp(x.data)

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        return (g * y,)

    return Tensor._from_op("exp", y, (x,), backward, x.dtype)


def log(x: Tensor) -> Tensor:
    """Natural logarithm; non-positive input is a numeric error."""
    if (x.data <= 0).any():
        msg = "log of non-positive value"
        raise NumericError(msg)

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        return (g / x.data,)

    return Tensor._from_op("log", np.log(x.data), (x,), backward, x.dtype)


def tanh(x: Tensor) -> Tensor:
    y = np.tanh(x.data)

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        return (g * (1.0 - y * y),)

    return Tensor._from_op("tanh", y, (x,), backward, x.dtype)


def _sigmoid_values(v: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * v))


def sigmoid(x: Tensor) -> Tensor:
    y = _sigmoid_values(x.data)

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        return (g * y * (1.0 - y),)

    return Tensor._from_op("sigmoid", y, (x,), backward, x.dtype)


def silu(x: Tensor) -> Tensor:
    """x * sigmoid(x)."""
    s = _sigmoid_values(x.data)

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        return (g * (s + x.data * s * (1.0 - s)),)

    return Tensor._from_op("silu", x.data * s, (x,), backward, x.dtype)


def clip(x: Tensor, low: float, high: float) -> Tensor:
    """Clamp values; gradient passes only where the input is inside the bounds."""
    inside = (x.data >= low) & (x.data <= high)

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        return (g * inside,)

    return Tensor._from_op("clip", np.clip(x.data, low, high), (x,), backward, x.dtype)


# ---------------------------------------------------------------------------
# Reductions and shape manipulation
# ---------------------------------------------------------------------------


Axis = int | tuple[int, ...] | None


def sum(x: Tensor, axis: Axis = None, *, keepdims: bool = False) -> Tensor:  # noqa: A001
    """Sum over ``axis`` (all axes when None)."""
    out = np.sum(x.data, axis=axis, keepdims=keepdims)

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return Tensor._from_op("sum", out, (x,), backward, x.dtype)


def mean(x: Tensor, axis: Axis = None, *, keepdims: bool = False) -> Tensor:
    """Arithmetic mean over ``axis``."""
    total = sum(x, axis, keepdims=keepdims)
    count = x.size // max(total.size, 1) if axis is not None else x.size
    return scale(total, 1.0 / count)


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    try:
        out = x.data.reshape(tuple(shape))
    except ValueError as exc:
        msg = f"reshape: cannot view {x.shape} as {tuple(shape)}"
        raise DimensionError(msg) from exc

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        return (g.reshape(x.shape),)

    return Tensor._from_op("reshape", out, (x,), backward, x.dtype)


def transpose(x: Tensor, axes: Sequence[int]) -> Tensor:
    perm = tuple(axes)
    if sorted(perm) != list(range(x.ndim)):
        msg = f"transpose: {perm} is not a permutation of {x.ndim} axes"
        raise DimensionError(msg)
    inverse = tuple(int(i) for i in np.argsort(perm))

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        return (np.ascontiguousarray(g.transpose(inverse)),)

    return Tensor._from_op(
        "transpose", np.ascontiguousarray(x.data.transpose(perm)), (x,), backward, x.dtype
    )


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    """Join tensors along an existing axis."""
    if not tensors:
        msg = "concat needs at least one tensor"
        raise ContractError(msg)
    first = tensors[0]
    ax = _norm_axis(axis, first.ndim)
    for t in tensors[1:]:
        if t.dtype != first.dtype:
            msg = f"dtype mismatch: {first.dtype} vs {t.dtype}"
            raise ContractError(msg)
        if t.ndim != first.ndim or any(
            t.shape[i] != first.shape[i] for i in range(first.ndim) if i != ax
        ):
            msg = f"concat: shapes {first.shape} and {t.shape} differ off axis {ax}"
            raise DimensionError(msg)
    sizes = [t.shape[ax] for t in tensors]
    splits = np.cumsum(sizes)[:-1]
    parts = tuple(tensors)

    def backward(g: np.ndarray) -> list[np.ndarray | None]:
        pieces = np.split(g, splits, axis=ax)
        return [p if t.requires_grad else None for p, t in zip(pieces, parts, strict=True)]

    out = np.concatenate([t.data for t in tensors], axis=ax)
    return Tensor._from_op("concat", out, parts, backward, first.dtype)


def take(x: Tensor, indices: ArrayLike, axis: int = 0) -> Tensor:
    """Gather slices along ``axis``; the backward pass scatters-adds."""
    idx = np.asarray(indices, dtype=np.int64)
    ax = _norm_axis(axis, x.ndim)
    if idx.size == 0:
        msg = "take: empty index set"
        raise DimensionError(msg)
    if idx.min() < -x.shape[ax] or idx.max() >= x.shape[ax]:
        msg = f"take: index out of range for axis {ax} of size {x.shape[ax]}"
        raise DimensionError(msg)

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        gx = np.zeros_like(x.data)
        moved = np.moveaxis(gx, ax, 0)
        lead = np.moveaxis(g, list(range(ax, ax + idx.ndim)), list(range(idx.ndim)))
        np.add.at(moved, idx, lead)
        return (gx,)

    return Tensor._from_op("take", np.take(x.data, idx, axis=ax), (x,), backward, x.dtype)


def embedding(table: Tensor, ids: ArrayLike) -> Tensor:
    """Row lookup ``table[ids]`` for integer id arrays of any shape."""
    return take(table, ids, axis=0)


# ---------------------------------------------------------------------------
# Linear algebra
# ---------------------------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Batched matrix product ``[.., m, p] x [.., p, n] -> [.., m, n]``.

    Raises:
        DimensionError: If the inner dimensions differ or batch dimensions are
            not broadcastable (equal, or one a suffix of the other)
    """
    ta, tb = _pair(a, b)
    if ta.ndim < 2 or tb.ndim < 2 or ta.shape[-1] != tb.shape[-2]:
        msg = f"matmul: shapes {ta.shape} and {tb.shape} are not aligned"
        raise DimensionError(msg)
    _broadcast_shape("matmul", ta.shape[:-2], tb.shape[:-2])

    def backward(g: np.ndarray) -> tuple[np.ndarray | None, np.ndarray | None]:
        ga = gb = None
        if ta.requires_grad:
            ga = _unbroadcast(np.matmul(g, np.swapaxes(tb.data, -1, -2)), ta.shape)
        if tb.requires_grad:
            gb = _unbroadcast(np.matmul(np.swapaxes(ta.data, -1, -2), g), tb.shape)
        return ga, gb

    return Tensor._from_op("matmul", np.matmul(ta.data, tb.data), (ta, tb), backward, ta.dtype)


def softmax(x: Tensor, axis: int = -1, mask: ArrayLike | None = None) -> Tensor:
    """Numerically stable softmax with an optional boolean key mask.

    Masked positions behave as ``-inf`` logits: they receive exactly zero
    weight and zero gradient.

    Raises:
        ContractError: If every position of some slice is masked
    """
    ax = _norm_axis(axis, x.ndim)
    logits = x.data
    if mask is not None:
        try:
            keep = np.broadcast_to(np.asarray(mask, dtype=bool), x.shape)
        except ValueError as exc:
            msg = f"softmax: mask shape {np.shape(mask)} does not broadcast to {x.shape}"
            raise DimensionError(msg) from exc
        if not keep.any(axis=ax).all():
            msg = "softmax: all positions masked along the reduction axis"
            raise ContractError(msg)
        logits = np.where(keep, logits, -np.inf)
    shifted = logits - logits.max(axis=ax, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=ax, keepdims=True)

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        return (y * (g - (g * y).sum(axis=ax, keepdims=True)),)

    return Tensor._from_op("softmax", y, (x,), backward, x.dtype)


def l2_normalize(x: Tensor, axis: int = -1, eps: float = 1e-12) -> Tensor:
    """Scale slices along ``axis`` to unit Euclidean norm."""
    ax = _norm_axis(axis, x.ndim)
    norm = np.sqrt((x.data * x.data).sum(axis=ax, keepdims=True))
    denom = np.maximum(norm, eps)
    y = x.data / denom

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        radial = (g * y).sum(axis=ax, keepdims=True)
        return (np.where(norm > eps, (g - y * radial) / denom, g / eps),)

    return Tensor._from_op("l2_normalize", y, (x,), backward, x.dtype)


# ---------------------------------------------------------------------------
# Convolution, normalization, resampling
# ---------------------------------------------------------------------------


def conv2d(
    x: Tensor, w: Tensor, bias: Tensor | None = None, stride: int = 1, pad: int = 0
) -> Tensor:
    """2-D cross-correlation of ``x [B,C,H,W]`` with ``w [O,C,kh,kw]``.

    Output spatial size is ``floor((H + 2*pad - kh) / stride) + 1``.

    Raises:
        DimensionError: On rank/channel mismatch or a kernel larger than the
            padded input
        ConfigError: If stride < 1 or pad < 0
    """
    if x.ndim != 4 or w.ndim != 4:
        msg = f"conv2d: expected 4-d input and kernel, got {x.shape} and {w.shape}"
        raise DimensionError(msg)
    if x.dtype != w.dtype:
        msg = f"dtype mismatch: {x.dtype} vs {w.dtype}"
        raise ContractError(msg)
    if stride < 1 or pad < 0:
        msg = f"conv2d: invalid stride={stride} pad={pad}"
        raise ConfigError(msg)
    B, C, H, W = x.shape
    O, Cw, kh, kw = w.shape
    if C != Cw:
        msg = f"conv2d: input {x.shape} has {C} channels, kernel {w.shape} expects {Cw}"
        raise DimensionError(msg)
    Hp, Wp = H + 2 * pad, W + 2 * pad
    if kh > Hp or kw > Wp:
        msg = f"conv2d: kernel {kh}x{kw} larger than padded input {Hp}x{Wp}"
        raise DimensionError(msg)
    if bias is not None and bias.shape != (O,):
        msg = f"conv2d: bias shape {bias.shape} does not match {O} output channels"
        raise DimensionError(msg)

    xp = np.pad(x.data, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x.data
    windows = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    Ho, Wo = windows.shape[2], windows.shape[3]
    out = np.tensordot(windows, w.data, axes=([1, 4, 5], [1, 2, 3])).transpose(0, 3, 1, 2)
    if bias is not None:
        out = out + bias.data[None, :, None, None]
    out = np.ascontiguousarray(out)

    def backward(g: np.ndarray) -> list[np.ndarray | None]:
        gx = gw = gb = None
        if w.requires_grad:
            gw = np.tensordot(g, windows, axes=([0, 2, 3], [0, 2, 3]))
        if bias is not None and bias.requires_grad:
            gb = g.sum(axis=(0, 2, 3))
        if x.requires_grad:
            gxp = np.zeros_like(xp)
            for i in range(kh):
                for j in range(kw):
                    contrib = np.tensordot(g, w.data[:, :, i, j], axes=([1], [0]))
                    gxp[:, :, i : i + stride * Ho : stride, j : j + stride * Wo : stride] += (
                        contrib.transpose(0, 3, 1, 2)
                    )
            gx = gxp[:, :, pad : pad + H, pad : pad + W] if pad else gxp
        grads: list[np.ndarray | None] = [gx, gw]
        if bias is not None:
            grads.append(gb)
        return grads

    inputs = (x, w) if bias is None else (x, w, bias)
    return Tensor._from_op("conv2d", out, inputs, backward, x.dtype)


def group_norm(
    x: Tensor, groups: int, gamma: Tensor, beta: Tensor, eps: float = 1e-5
) -> Tensor:
    """Group normalization of ``[B, C, H, W]`` followed by a per-channel affine.

    Raises:
        ConfigError: If ``C`` is not divisible by ``groups``
    """
    if x.ndim != 4:
        msg = f"group_norm: expected [B,C,H,W], got {x.shape}"
        raise DimensionError(msg)
    B, C, H, W = x.shape
    if groups <= 0 or C % groups:
        msg = f"group_norm: {C} channels not divisible into {groups} groups"
        raise ConfigError(msg)
    if gamma.shape != (C,) or beta.shape != (C,):
        msg = f"group_norm: affine shapes {gamma.shape}/{beta.shape} do not match {C} channels"
        raise DimensionError(msg)
    xg = x.data.reshape(B, groups, -1)
    mu = xg.mean(axis=-1, keepdims=True)
    var = xg.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat_g = (xg - mu) * inv
    xhat = xhat_g.reshape(B, C, H, W)
    out = xhat * gamma.data[None, :, None, None] + beta.data[None, :, None, None]

    def backward(g: np.ndarray) -> tuple[np.ndarray | None, ...]:
        ggamma = (g * xhat).sum(axis=(0, 2, 3)) if gamma.requires_grad else None
        gbeta = g.sum(axis=(0, 2, 3)) if beta.requires_grad else None
        gx = None
        if x.requires_grad:
            gxhat = (g * gamma.data[None, :, None, None]).reshape(B, groups, -1)
            n = gxhat.shape[-1]
            gx = (
                inv
                / n
                * (
                    n * gxhat
                    - gxhat.sum(axis=-1, keepdims=True)
                    - xhat_g * (gxhat * xhat_g).sum(axis=-1, keepdims=True)
                )
            ).reshape(B, C, H, W)
        return gx, ggamma, gbeta

    return Tensor._from_op("group_norm", out, (x, gamma, beta), backward, x.dtype)


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis, then apply a per-feature affine."""
    D = x.shape[-1]
    if gamma.shape != (D,) or beta.shape != (D,):
        msg = f"layer_norm: affine shapes {gamma.shape}/{beta.shape} do not match {D}"
        raise DimensionError(msg)
    mu = x.data.mean(axis=-1, keepdims=True)
    var = x.data.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv
    out = xhat * gamma.data + beta.data

    def backward(g: np.ndarray) -> tuple[np.ndarray | None, ...]:
        lead = tuple(range(g.ndim - 1))
        ggamma = (g * xhat).sum(axis=lead) if gamma.requires_grad else None
        gbeta = g.sum(axis=lead) if beta.requires_grad else None
        gx = None
        if x.requires_grad:
            gxhat = g * gamma.data
            gx = (
                inv
                / D
                * (
                    D * gxhat
                    - gxhat.sum(axis=-1, keepdims=True)
                    - xhat * (gxhat * xhat).sum(axis=-1, keepdims=True)
                )
            )
        return gx, ggamma, gbeta

    return Tensor._from_op("layer_norm", out, (x, gamma, beta), backward, x.dtype)


def avg_pool2(x: Tensor) -> Tensor:
    """Average disjoint 2x2 blocks over the last two axes."""
    if x.ndim < 2 or x.shape[-2] % 2 or x.shape[-1] % 2:
        msg = f"avg_pool2: spatial dims must be even, got {x.shape}"
        raise DimensionError(msg)
    d = x.data
    top = d[..., 0::2, 0::2] + d[..., 0::2, 1::2]
    bottom = d[..., 1::2, 0::2] + d[..., 1::2, 1::2]
    out = 0.25 * (top + bottom)

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        return (np.repeat(np.repeat(g, 2, axis=-2), 2, axis=-1) * 0.25,)

    return Tensor._from_op("avg_pool2", out, (x,), backward, x.dtype)


def nearest_upsample2(x: Tensor) -> Tensor:
    """Replicate each pixel into a 2x2 block over the last two axes."""
    out = np.repeat(np.repeat(x.data, 2, axis=-2), 2, axis=-1)
    H, W = x.shape[-2], x.shape[-1]

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        blocks = g.reshape((*g.shape[:-2], H, 2, W, 2))
        return (blocks.sum(axis=(-3, -1)),)

    return Tensor._from_op("nearest_upsample2", out, (x,), backward, x.dtype)


def add_channel(x: Tensor, v: Tensor) -> Tensor:
    """Add a per-sample, per-channel vector ``v [B, C]`` to ``x [B, C, H, W]``."""
    if x.ndim != 4 or v.shape != x.shape[:2]:
        msg = f"add_channel: cannot add {v.shape} to {x.shape}"
        raise DimensionError(msg)
    if x.dtype != v.dtype:
        msg = f"dtype mismatch: {x.dtype} vs {v.dtype}"
        raise ContractError(msg)

    def backward(g: np.ndarray) -> tuple[np.ndarray | None, np.ndarray | None]:
        return (
            g if x.requires_grad else None,
            g.sum(axis=(2, 3)) if v.requires_grad else None,
        )

    out = x.data + v.data[:, :, None, None]
    return Tensor._from_op("add_channel", out, (x, v), backward, x.dtype)


# ---------------------------------------------------------------------------
# Losses
# ---------------------------------------------------------------------------


def _loss_pair(op: str, a: Operand, b: Operand) -> tuple[Tensor, Tensor]:
    ta, tb = _pair(a, b)
    if ta.shape != tb.shape and tb.shape and ta.shape:
        msg = f"{op}: shape mismatch {ta.shape} vs {tb.shape}"
        raise DimensionError(msg)
    return ta, tb


def mse(a: Operand, b: Operand) -> Tensor:
    """Mean squared error over all elements."""
    ta, tb = _loss_pair("mse", a, b)
    diff = ta.data - tb.data
    n = diff.size

    def backward(g: np.ndarray) -> tuple[np.ndarray | None, np.ndarray | None]:
        base = g * (2.0 / n) * diff
        return (
            _unbroadcast(base, ta.shape) if ta.requires_grad else None,
            _unbroadcast(-base, tb.shape) if tb.requires_grad else None,
        )

    return Tensor._from_op("mse", np.mean(diff * diff), (ta, tb), backward, ta.dtype)


def l1(a: Operand, b: Operand) -> Tensor:
    """Mean absolute error over all elements."""
    ta, tb = _loss_pair("l1", a, b)
    diff = ta.data - tb.data
    n = diff.size

    def backward(g: np.ndarray) -> tuple[np.ndarray | None, np.ndarray | None]:
        base = g * np.sign(diff) / n
        return (
            _unbroadcast(base, ta.shape) if ta.requires_grad else None,
            _unbroadcast(-base, tb.shape) if tb.requires_grad else None,
        )

    return Tensor._from_op("l1", np.mean(np.abs(diff)), (ta, tb), backward, ta.dtype)


def bce(p: Operand, target: Operand) -> Tensor:
    """Binary cross-entropy of probabilities ``p`` against ``target``.

    Callers clamp ``p`` into ``[1e-7, 1 - 1e-7]`` first.

    Raises:
        NumericError: If any probability is outside the open interval (0, 1)
    """
    tp, tt = _loss_pair("bce", p, target)
    pv, tv = tp.data, tt.data
    if (pv <= 0).any() or (pv >= 1).any():
        msg = "bce: probabilities must lie strictly inside (0, 1)"
        raise NumericError(msg)
    log_p, log_q = np.log(pv), np.log1p(-pv)
    n = np.broadcast_shapes(pv.shape, tv.shape)
    count = math.prod(n) if n else 1
    value = -np.mean(tv * log_p + (1.0 - tv) * log_q)

    def backward(g: np.ndarray) -> tuple[np.ndarray | None, np.ndarray | None]:
        gp = gt = None
        if tp.requires_grad:
            gp = _unbroadcast(-g * (tv / pv - (1.0 - tv) / (1.0 - pv)) / count, tp.shape)
        if tt.requires_grad:
            gt = _unbroadcast(-g * (log_p - log_q) / count, tt.shape)
        return gp, gt

    return Tensor._from_op("bce", value, (tp, tt), backward, tp.dtype)
