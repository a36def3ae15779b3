"""Masked multi-head self-attention used by the text encoder and UNet blocks."""

from __future__ import annotations

import math

import numpy as np

from dense_face.tensor_core import Module, Parameter, Tensor, ops

from .kernel import attend


class SelfAttention(Module):
    """Self-attention with an output projection; the residual is added by the caller."""

    def __init__(
        self,
        dim: int,
        heads: int,
        head_dim: int,
        *,
        rng: np.random.Generator,
        dtype: type[np.floating] = np.float32,
    ) -> None:
        super().__init__()
        inner = heads * head_dim
        self.heads = heads
        self.w_q = Parameter((rng.standard_normal((dim, inner)) / math.sqrt(dim)).astype(dtype))
        self.w_k = Parameter((rng.standard_normal((dim, inner)) / math.sqrt(dim)).astype(dtype))
        self.w_v = Parameter((rng.standard_normal((dim, inner)) / math.sqrt(dim)).astype(dtype))
        self.w_out = Parameter(
            (rng.standard_normal((inner, dim)) / math.sqrt(inner)).astype(dtype)
        )
        self.b_out = Parameter(np.zeros(dim, dtype=dtype))

    def forward(self, x: Tensor, key_mask: np.ndarray | None = None) -> Tensor:
        out = attend(x, x, self.w_q, self.w_k, self.w_v, self.heads, key_mask)
        return ops.add(ops.matmul(out.merged, self.w_out), self.b_out)
