"""Multi-head scaled dot-product attention over token sequences.

Shapes follow ``[batch, tokens, features]``. Keys are masked with a boolean
``[batch, keys]`` array; masked keys receive exactly zero weight.
"""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

from dense_face.exceptions import DimensionError
from dense_face.tensor_core import Tensor, ops


@dataclass(frozen=True)
class AttentionOutput:
    """Per-head projections, attention weights and the merged head output."""

    q: Tensor
    k: Tensor
    v: Tensor
    weights: Tensor
    merged: Tensor


def split_heads(x: Tensor, heads: int) -> Tensor:
    """``[B, N, h*d] -> [B, h, N, d]``."""
    B, N, inner = x.shape
    if inner % heads:
        msg = f"feature width {inner} not divisible by {heads} heads"
        raise DimensionError(msg)
    return ops.transpose(ops.reshape(x, (B, N, heads, inner // heads)), (0, 2, 1, 3))


def merge_heads(x: Tensor) -> Tensor:
    """``[B, h, N, d] -> [B, N, h*d]``."""
    B, h, N, d = x.shape
    return ops.reshape(ops.transpose(x, (0, 2, 1, 3)), (B, N, h * d))


def attend(
    q_in: Tensor,
    kv_in: Tensor,
    w_q: Tensor,
    w_k: Tensor,
    w_v: Tensor,
    heads: int,
    key_mask: np.ndarray | None = None,
) -> AttentionOutput:
    """Project queries/keys/values and apply masked softmax attention.

    Args:
        q_in: Query features ``[B, N, c_q]``
        kv_in: Context features ``[B, M, c_kv]``
        w_q: ``[c_q, h*d_k]``; w_k, w_v: ``[c_kv, h*d_k]``
        heads: Number of heads ``h``
        key_mask: Boolean ``[B, M]``; True marks keys that may be attended
    """
    if q_in.ndim != 3 or kv_in.ndim != 3 or q_in.shape[0] != kv_in.shape[0]:
        msg = f"attention expects [B,N,c] inputs with equal batch, got {q_in.shape}, {kv_in.shape}"
        raise DimensionError(msg)
    q = split_heads(ops.matmul(q_in, w_q), heads)
    k = split_heads(ops.matmul(kv_in, w_k), heads)
    v = split_heads(ops.matmul(kv_in, w_v), heads)
    d_k = q.shape[-1]
    logits = ops.scale(ops.matmul(q, ops.transpose(k, (0, 1, 3, 2))), 1.0 / math.sqrt(d_k))
    mask = None
    if key_mask is not None:
        keep = np.asarray(key_mask, dtype=bool)
        if keep.shape != (kv_in.shape[0], kv_in.shape[1]):
            msg = f"key mask {keep.shape} does not match context {kv_in.shape[:2]}"
            raise DimensionError(msg)
        mask = keep[:, None, None, :]
    weights = ops.softmax(logits, axis=-1, mask=mask)
    merged = merge_heads(ops.matmul(weights, v))
    return AttentionOutput(q=q, k=k, v=v, weights=weights, merged=merged)
