"""Stand-in text encoder: token table, sinusoidal positions, masked self-attention.

The output ``c`` lives in the text space that every cross-attention site
reads keys and values from. Padding positions are excluded as attention
keys inside the encoder and in the condition bundle.
"""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

from dense_face.attention import SelfAttention
from dense_face.constants import Constants
from dense_face.exceptions import DimensionError, TokenizationError
from dense_face.tensor_core import LayerNorm, Linear, Module, ModuleList, Parameter, Tensor, ops

from .vocabulary import Vocabulary, token_mask


def sinusoidal_positions(length: int, dim: int) -> np.ndarray:
    """``[length, dim]`` table with sin on even and cos on odd features."""
    pos = np.arange(length, dtype=np.float64)[:, None]
    freq = np.exp(-math.log(10000.0) * (np.arange(0, dim, 2, dtype=np.float64) / dim))
    table = np.zeros((length, dim), dtype=np.float64)
    table[:, 0::2] = np.sin(pos * freq)
    table[:, 1::2] = np.cos(pos * freq[: dim // 2])
    return table


class TextBlock(Module):
    """Pre-norm transformer block."""

    def __init__(
        self,
        dim: int,
        heads: int,
        head_dim: int,
        *,
        rng: np.random.Generator,
        dtype: type[np.floating],
    ) -> None:
        super().__init__()
        self.norm1 = LayerNorm(dim, dtype=dtype)
        self.attn = SelfAttention(dim, heads, head_dim, rng=rng, dtype=dtype)
        self.norm2 = LayerNorm(dim, dtype=dtype)
        self.ff1 = Linear(dim, 2 * dim, rng=rng, dtype=dtype)
        self.ff2 = Linear(2 * dim, dim, rng=rng, dtype=dtype)

    def forward(self, x: Tensor, mask: np.ndarray) -> Tensor:
        x = ops.add(x, self.attn.forward(self.norm1.forward(x), mask))
        hidden = ops.silu(self.ff1.forward(self.norm2.forward(x)))
        return ops.add(x, self.ff2.forward(hidden))


@dataclass(frozen=True)
class TextEmbedding:
    """Encoded captions ``tokens [B, L, k]`` and their non-padding mask ``[B, L]``."""

    tokens: Tensor
    mask: np.ndarray

    @property
    def length(self) -> int:
        return self.tokens.shape[1]

    @property
    def dim(self) -> int:
        return self.tokens.shape[2]


class TextEncoder(Module):
    """Embedding table plus ``layers`` masked self-attention blocks."""

    def __init__(
        self,
        vocab_size: int,
        *,
        dim: int = Constants.TEXT_DIM,
        length: int = Constants.MAX_TOKENS,
        layers: int = Constants.TEXT_LAYERS,
        heads: int = Constants.ATTENTION_HEADS,
        head_dim: int = Constants.HEAD_DIM,
        rng: np.random.Generator,
        dtype: type[np.floating] = np.float32,
    ) -> None:
        super().__init__()
        self.length = length
        self.table = Parameter((rng.standard_normal((vocab_size, dim)) * 0.5).astype(dtype))
        self.positions = sinusoidal_positions(length, dim)
        self.blocks = ModuleList(
            TextBlock(dim, heads, head_dim, rng=rng, dtype=dtype) for _ in range(layers)
        )
        self.norm_out = LayerNorm(dim, dtype=dtype)

    @property
    def vocab_size(self) -> int:
        return self.table.shape[0]

    @property
    def dim(self) -> int:
        return self.table.shape[1]

    def _check_ids(self, ids: np.ndarray) -> np.ndarray:
        arr = np.atleast_2d(np.asarray(ids, dtype=np.int64))
        if arr.ndim != 2 or arr.shape[1] != self.length:
            msg = f"token ids must be [B, {self.length}], got {arr.shape}"
            raise DimensionError(msg)
        if arr.min() < 0 or arr.max() >= self.vocab_size:
            msg = f"token id outside [0, {self.vocab_size})"
            raise TokenizationError(msg)
        return arr

    def embed_tokens(self, ids: np.ndarray) -> Tensor:
        """Layer-0 embedding: table rows plus sinusoidal positions, ``[B, L, k]``."""
        arr = self._check_ids(ids)
        positions = Tensor(self.positions, dtype=self.table.dtype)
        return ops.add(ops.embedding(self.table, arr), positions)

    def forward(self, ids: np.ndarray) -> TextEmbedding:
        arr = self._check_ids(ids)
        mask = token_mask(arr)
        x = self.embed_tokens(arr)
        for block in self.blocks:
            x = block.forward(x, mask)
        return TextEmbedding(tokens=self.norm_out.forward(x), mask=mask)

    def face_embedding(self, vocab: Vocabulary) -> Tensor:
        """The raw ``face`` word embedding ``[k]`` that identity offsets are added to."""
        return ops.take(self.table, vocab.face_id, axis=0)


def encode_text(ids: np.ndarray, encoder: TextEncoder) -> TextEmbedding:
    """Encode ``[L]`` or ``[B, L]`` token ids."""
    return encoder.forward(ids)
