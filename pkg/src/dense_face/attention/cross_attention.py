"""Cross-attention and its pose-controllable adapter.

Base cross-attention projects latent features ``f`` to queries and the
condition tokens ``c`` to keys and values::

    q = f w_q,  k = c w_k,  v = c w_v
    f_out = softmax(q k^T / sqrt(d_k)) v w_out + b_out

The adapter adds residual projections to each base matrix, so that
``q' = f (w_q + w'_q) = q + dq`` and likewise for keys and values. Adapter
weights start at zero, making an untrained adapter an exact no-op.

Text-editing mode uses the base path on text tokens only; face-generation
mode uses the adapted path on the full bundle (text, identity token, pose
token). The residual ``f + f_out`` is added by the surrounding UNet block.
"""

from __future__ import annotations

from dataclasses import dataclass
import math
from typing import TYPE_CHECKING

import numpy as np

from dense_face.constants import GenerationMode
from dense_face.exceptions import ConfigError, DimensionError
from dense_face.tensor_core import Module, Parameter, Tensor, ops

from .kernel import attend

if TYPE_CHECKING:
    from dense_face.conditioning.bundle import ConditionBundle


class CrossAttentionWeights(Module):
    """Base projections of one cross-attention site.

    Attributes:
        w_q: ``[c_f, h*d_k]``
        w_k, w_v: ``[k, h*d_k]``
        w_out: ``[h*d_k, c_f]``
        b_out: ``[c_f]``
    """

    def __init__(
        self,
        feature_dim: int,
        context_dim: int,
        heads: int,
        head_dim: int,
        *,
        rng: np.random.Generator,
        dtype: type[np.floating] = np.float32,
    ) -> None:
        super().__init__()
        inner = heads * head_dim
        self.heads = heads
        self.w_q = Parameter(self._init(rng, feature_dim, inner, dtype))
        self.w_k = Parameter(self._init(rng, context_dim, inner, dtype))
        self.w_v = Parameter(self._init(rng, context_dim, inner, dtype))
        self.w_out = Parameter(self._init(rng, inner, feature_dim, dtype))
        self.b_out = Parameter(np.zeros(feature_dim, dtype=dtype))

    @staticmethod
    def _init(
        rng: np.random.Generator, fan_in: int, fan_out: int, dtype: type[np.floating]
    ) -> np.ndarray:
        return (rng.standard_normal((fan_in, fan_out)) / math.sqrt(fan_in)).astype(dtype)

    @property
    def feature_dim(self) -> int:
        return self.w_q.shape[0]

    @property
    def context_dim(self) -> int:
        return self.w_k.shape[0]


class AdapterWeights(Module):
    """Residual projections ``w'_q, w'_k, w'_v`` shaped like their base matrices."""

    def __init__(self, base: CrossAttentionWeights) -> None:
        super().__init__()
        dtype = base.w_q.dtype
        self.w_q_prime = Parameter(np.zeros(base.w_q.shape, dtype=dtype))
        self.w_k_prime = Parameter(np.zeros(base.w_k.shape, dtype=dtype))
        self.w_v_prime = Parameter(np.zeros(base.w_v.shape, dtype=dtype))

    def check_matches(self, base: CrossAttentionWeights) -> None:
        pairs = (
            (self.w_q_prime, base.w_q),
            (self.w_k_prime, base.w_k),
            (self.w_v_prime, base.w_v),
        )
        for residual, matrix in pairs:
            if residual.shape != matrix.shape:
                msg = f"adapter shape {residual.shape} differs from base {matrix.shape}"
                raise DimensionError(msg)


@dataclass(frozen=True)
class AttentionActivations:
    """Intermediate quantities of one attention evaluation.

    ``q``, ``k`` and ``v`` are per-head ``[B, h, tokens, d_k]``; ``weights``
    are the softmax rows ``[B, h, N, M]``; ``pre_projection`` is the merged
    head output before ``w_out``; ``f_out`` is the site output.
    """

    f: Tensor
    q: Tensor
    k: Tensor
    v: Tensor
    weights: Tensor
    pre_projection: Tensor
    f_out: Tensor


def attention_activations(
    f: Tensor,
    cond: ConditionBundle,
    w: CrossAttentionWeights,
    a: AdapterWeights | None = None,
    key_mask: np.ndarray | None = None,
) -> AttentionActivations:
    """Evaluate one site and keep every intermediate.

    Args:
        f: Flattened latent features ``[B, N, c_f]``
        cond: Condition bundle with tokens ``[B, M, k]``
        w: Base weights
        a: Optional adapter; when given the projections are ``w + w'``
        key_mask: Overrides ``cond.mask`` when given
    """
    if f.ndim != 3 or f.shape[-1] != w.feature_dim:
        msg = f"features {f.shape} do not match site width {w.feature_dim}"
        raise DimensionError(msg)
    if cond.tokens.shape[-1] != w.context_dim:
        msg = f"condition width {cond.tokens.shape[-1]} does not match {w.context_dim}"
        raise DimensionError(msg)
    w_q, w_k, w_v = w.w_q, w.w_k, w.w_v
    if a is not None:
        a.check_matches(w)
        w_q = ops.add(w_q, a.w_q_prime)
        w_k = ops.add(w_k, a.w_k_prime)
        w_v = ops.add(w_v, a.w_v_prime)
    mask = cond.mask if key_mask is None else key_mask
    out = attend(f, cond.tokens, w_q, w_k, w_v, w.heads, mask)
    f_out = ops.add(ops.matmul(out.merged, w.w_out), w.b_out)
    return AttentionActivations(
        f=f, q=out.q, k=out.k, v=out.v, weights=out.weights, pre_projection=out.merged, f_out=f_out
    )


def cross_attention(f: Tensor, cond: ConditionBundle, w: CrossAttentionWeights) -> Tensor:
    """Base cross-attention output ``f_out`` (before the residual add)."""
    return attention_activations(f, cond, w).f_out


def adapted_cross_attention(
    f: Tensor, cond: ConditionBundle, w: CrossAttentionWeights, a: AdapterWeights
) -> Tensor:
    """Adapter cross-attention output ``f'_out`` with projections ``w + w'``."""
    return attention_activations(f, cond, w, a).f_out


def mode_dispatch(
    mode: GenerationMode,
    f: Tensor,
    cond: ConditionBundle,
    w: CrossAttentionWeights,
    a: AdapterWeights | None = None,
) -> Tensor:
    """Route one cross-attention site by generation mode.

    Text-editing mode ignores any adapter and attends to text tokens only.

    Raises:
        ConfigError: If face-generation mode is requested without an adapter
    """
    if mode is GenerationMode.TEXT_EDITING:
        return attention_activations(f, cond, w, key_mask=cond.text_mask()).f_out
    if a is None:
        msg = "face_generation mode requires adapter weights at every cross-attention site"
        raise ConfigError(msg)
    return adapted_cross_attention(f, cond, w, a)
