"""UNet building blocks.

Feature maps are ``[B, C, H, W]``. Attention blocks flatten the spatial grid
to ``[B, H*W, C]`` tokens, apply pre-norm self-attention (optional),
cross-attention through a caller-supplied function and a feed-forward
layer, each with a residual add, and fold the tokens back.
"""

from __future__ import annotations

from collections.abc import Callable
import math

import numpy as np

from dense_face.attention import CrossAttentionWeights, SelfAttention
from dense_face.tensor_core import Conv2d, GroupNorm, LayerNorm, Linear, Module, Tensor, ops

CrossFn = Callable[[str, Tensor, CrossAttentionWeights], Tensor]


def timestep_features(t: np.ndarray, dim: int) -> np.ndarray:
    """Sinusoidal features ``[B, dim]``: ``sin(t * f_i)`` then ``cos(t * f_i)``.

    ``f_i = exp(-ln(10000) * i / (dim / 2))`` for ``i < dim / 2``.
    """
    half = dim // 2
    freq = np.exp(-math.log(10000.0) * np.arange(half, dtype=np.float64) / half)
    angles = np.asarray(t, dtype=np.float64).reshape(-1, 1) * freq[None, :]
    return np.concatenate([np.sin(angles), np.cos(angles)], axis=1)


class TimeEmbedding(Module):
    """Sinusoidal features followed by a two-layer SiLU MLP."""

    def __init__(self, dim: int, *, rng: np.random.Generator, dtype: type[np.floating]) -> None:
        super().__init__()
        self.dim = dim
        self.fc1 = Linear(dim, dim, rng=rng, dtype=dtype)
        self.fc2 = Linear(dim, dim, rng=rng, dtype=dtype)

    def forward(self, t: np.ndarray) -> Tensor:
        feats = Tensor(timestep_features(t, self.dim), dtype=self.fc1.weight.dtype)
        return self.fc2.forward(ops.silu(self.fc1.forward(feats)))


class ResBlock(Module):
    """Two 3x3 convolutions with GroupNorm/SiLU and a per-channel time shift."""

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        time_dim: int,
        groups: int,
        *,
        rng: np.random.Generator,
        dtype: type[np.floating],
    ) -> None:
        super().__init__()
        self.norm1 = GroupNorm(in_channels, groups, dtype=dtype)
        self.conv1 = Conv2d(in_channels, out_channels, 3, rng=rng, dtype=dtype)
        self.time_proj = Linear(time_dim, out_channels, rng=rng, dtype=dtype)
        self.norm2 = GroupNorm(out_channels, groups, dtype=dtype)
        self.conv2 = Conv2d(out_channels, out_channels, 3, rng=rng, dtype=dtype)
        self.skip = (
            Conv2d(in_channels, out_channels, 1, rng=rng, dtype=dtype)
            if in_channels != out_channels
            else None
        )

    def forward(self, x: Tensor, temb_act: Tensor) -> Tensor:
        """``temb_act`` is the SiLU-activated time embedding ``[B, time_dim]``."""
        h = self.conv1.forward(ops.silu(self.norm1.forward(x)))
        h = ops.add_channel(h, self.time_proj.forward(temb_act))
        h = self.conv2.forward(ops.silu(self.norm2.forward(h)))
        skip = x if self.skip is None else self.skip.forward(x)
        return ops.add(skip, h)


def to_tokens(x: Tensor) -> Tensor:
    B, C, H, W = x.shape
    return ops.reshape(ops.transpose(x, (0, 2, 3, 1)), (B, H * W, C))


def from_tokens(f: Tensor, height: int, width: int) -> Tensor:
    B, _, C = f.shape
    return ops.transpose(ops.reshape(f, (B, height, width, C)), (0, 3, 1, 2))


class SpatialTransformer(Module):
    """Attention block at one cross-attention site."""

    def __init__(
        self,
        channels: int,
        context_dim: int,
        heads: int,
        head_dim: int,
        *,
        site: str,
        self_attention: bool,
        rng: np.random.Generator,
        dtype: type[np.floating],
    ) -> None:
        super().__init__()
        self.site = site
        if self_attention:
            self.norm_self = LayerNorm(channels, dtype=dtype)
            self.self_attn = SelfAttention(channels, heads, head_dim, rng=rng, dtype=dtype)
        else:
            self.self_attn = None
        self.norm_cross = LayerNorm(channels, dtype=dtype)
        self.cross = CrossAttentionWeights(
            channels, context_dim, heads, head_dim, rng=rng, dtype=dtype
        )
        self.norm_ff = LayerNorm(channels, dtype=dtype)
        self.ff1 = Linear(channels, 2 * channels, rng=rng, dtype=dtype)
        self.ff2 = Linear(2 * channels, channels, rng=rng, dtype=dtype)

    def forward(self, x: Tensor, cross_fn: CrossFn) -> Tensor:
        _, _, H, W = x.shape
        f = to_tokens(x)
        if self.self_attn is not None:
            f = ops.add(f, self.self_attn.forward(self.norm_self.forward(f)))
        f = ops.add(f, cross_fn(self.site, self.norm_cross.forward(f), self.cross))
        hidden = ops.silu(self.ff1.forward(self.norm_ff.forward(f)))
        f = ops.add(f, self.ff2.forward(hidden))
        return from_tokens(f, H, W)


class Downsample(Module):
    """2x2 average pooling followed by a 3x3 convolution."""

    def __init__(
        self, channels: int, *, rng: np.random.Generator, dtype: type[np.floating]
    ) -> None:
        super().__init__()
        self.conv = Conv2d(channels, channels, 3, rng=rng, dtype=dtype)

    def forward(self, x: Tensor) -> Tensor:
        return self.conv.forward(ops.avg_pool2(x))


class Upsample(Module):
    """Nearest-neighbour 2x upsampling followed by a 3x3 convolution."""

    def __init__(
        self, channels: int, *, rng: np.random.Generator, dtype: type[np.floating]
    ) -> None:
        super().__init__()
        self.conv = Conv2d(channels, channels, 3, rng=rng, dtype=dtype)

    def forward(self, x: Tensor) -> Tensor:
        return self.conv.forward(ops.nearest_upsample2(x))
