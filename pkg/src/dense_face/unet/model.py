"""The denoising UNet.

The encoder keeps one skip tensor per level (taken before downsampling);
the decoder concatenates each skip with the upsampled stream, so pose
features injected into a skip reach the decoder at that resolution. The
decoder output of every level is captured as ``InternalFeatures`` for the
dense heads.

Cross-attention sites are named ``down/{level}/{block}``, ``mid`` and
``up/{level}/{block}``; adapters are looked up by these names.
"""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from dense_face.attention import AdapterWeights, CrossAttentionWeights, mode_dispatch
from dense_face.constants import GenerationMode
from dense_face.exceptions import ContractError, DimensionError, TimestepRangeError
from dense_face.tensor_core import Conv2d, GroupNorm, Module, ModuleList, Tensor, ops

from .blocks import CrossFn, Downsample, ResBlock, SpatialTransformer, TimeEmbedding, Upsample
from .config import UNetConfig

if TYPE_CHECKING:
    from dense_face.conditioning import ConditionBundle

MIDDLE_SITE = "mid"


@dataclass(frozen=True)
class InternalFeatures:
    """Decoder feature maps per level (index 0 is full resolution)."""

    maps: tuple[Tensor, ...]
    mode: GenerationMode

    def at_level(self, level: int) -> Tensor:
        return self.maps[level]

    @property
    def resolutions(self) -> tuple[int, ...]:
        return tuple(m.shape[-1] for m in self.maps)


@dataclass(frozen=True)
class PoseFeatures:
    """Projected pose-branch features: one per encoder level, plus the middle block."""

    skips: tuple[Tensor, ...]
    middle: Tensor | None = None


def batch_timesteps(t: int | np.ndarray, batch: int, total: int) -> np.ndarray:
    """Broadcast ``t`` to ``[batch]`` int64 and validate ``0 <= t < total``."""
    arr = np.asarray(t)
    if not np.issubdtype(arr.dtype, np.integer):
        msg = f"timesteps must be integers, got {arr.dtype}"
        raise TimestepRangeError(msg)
    arr = np.full(batch, int(arr), dtype=np.int64) if arr.ndim == 0 else arr.astype(np.int64)
    if arr.shape != (batch,):
        msg = f"timesteps shape {np.shape(t)} does not match batch {batch}"
        raise DimensionError(msg)
    if (arr < 0).any() or (arr >= total).any():
        msg = f"timestep outside [0, {total})"
        raise TimestepRangeError(msg)
    return arr


class EncoderLevel(Module):
    def __init__(
        self,
        config: UNetConfig,
        level: int,
        in_channels: int,
        *,
        rng: np.random.Generator,
        dtype: type[np.floating],
    ) -> None:
        super().__init__()
        out = config.channels(level)
        self.res = ModuleList()
        self.attn = ModuleList()
        for b in range(config.blocks_per_level):
            width = in_channels if b == 0 else out
            self.res.append(
                ResBlock(width, out, config.time_dim, config.groups, rng=rng, dtype=dtype)
            )
            if config.has_cross_attention(level):
                self.attn.append(
                    SpatialTransformer(
                        out,
                        config.context_dim,
                        config.heads,
                        config.head_dim,
                        site=f"down/{level}/{b}",
                        self_attention=config.has_self_attention(level),
                        rng=rng,
                        dtype=dtype,
                    )
                )
        self.down = Downsample(out, rng=rng, dtype=dtype) if level < config.levels - 1 else None

    def forward(self, x: Tensor, temb_act: Tensor, cross_fn: CrossFn) -> tuple[Tensor, Tensor]:
        """Return ``(skip, next_input)``."""
        h = x
        for b, res in enumerate(self.res):
            h = res.forward(h, temb_act)
            if len(self.attn):
                h = self.attn[b].forward(h, cross_fn)
        return h, (h if self.down is None else self.down.forward(h))


class UNetEncoder(Module):
    """Input convolution and the downsampling path."""

    def __init__(
        self, config: UNetConfig, *, rng: np.random.Generator, dtype: type[np.floating]
    ) -> None:
        super().__init__()
        self.conv_in = Conv2d(config.in_channels, config.channels(0), 3, rng=rng, dtype=dtype)
        self.levels = ModuleList()
        width = config.channels(0)
        for level in range(config.levels):
            self.levels.append(EncoderLevel(config, level, width, rng=rng, dtype=dtype))
            width = config.channels(level)

    def forward(
        self, x: Tensor, temb_act: Tensor, cross_fn: CrossFn
    ) -> tuple[Tensor, list[Tensor]]:
        h = self.conv_in.forward(x)
        skips: list[Tensor] = []
        for level in self.levels:
            skip, h = level.forward(h, temb_act, cross_fn)
            skips.append(skip)
        return h, skips


class MiddleBlock(Module):
    """ResBlock, attention, ResBlock at the coarsest resolution."""

    def __init__(
        self, config: UNetConfig, *, rng: np.random.Generator, dtype: type[np.floating]
    ) -> None:
        super().__init__()
        width = config.channels(config.levels - 1)
        self.res1 = ResBlock(width, width, config.time_dim, config.groups, rng=rng, dtype=dtype)
        self.attn = SpatialTransformer(
            width,
            config.context_dim,
            config.heads,
            config.head_dim,
            site=MIDDLE_SITE,
            self_attention=True,
            rng=rng,
            dtype=dtype,
        )
        self.res2 = ResBlock(width, width, config.time_dim, config.groups, rng=rng, dtype=dtype)

    def forward(self, x: Tensor, temb_act: Tensor, cross_fn: CrossFn) -> Tensor:
        h = self.res1.forward(x, temb_act)
        h = self.attn.forward(h, cross_fn)
        return self.res2.forward(h, temb_act)


class DecoderLevel(Module):
    def __init__(
        self,
        config: UNetConfig,
        level: int,
        in_channels: int,
        *,
        rng: np.random.Generator,
        dtype: type[np.floating],
    ) -> None:
        super().__init__()
        out = config.channels(level)
        self.res = ModuleList()
        self.attn = ModuleList()
        for b in range(config.blocks_per_level):
            width = in_channels + out if b == 0 else out
            self.res.append(
                ResBlock(width, out, config.time_dim, config.groups, rng=rng, dtype=dtype)
            )
            if config.has_cross_attention(level):
                self.attn.append(
                    SpatialTransformer(
                        out,
                        config.context_dim,
                        config.heads,
                        config.head_dim,
                        site=f"up/{level}/{b}",
                        self_attention=config.has_self_attention(level),
                        rng=rng,
                        dtype=dtype,
                    )
                )
        self.up = Upsample(out, rng=rng, dtype=dtype) if level > 0 else None

    def forward(
        self, x: Tensor, skip: Tensor, temb_act: Tensor, cross_fn: CrossFn
    ) -> tuple[Tensor, Tensor]:
        """Return ``(captured_features, next_input)``."""
        h = ops.concat([x, skip], axis=1)
        for b, res in enumerate(self.res):
            h = res.forward(h, temb_act)
            if len(self.attn):
                h = self.attn[b].forward(h, cross_fn)
        return h, (h if self.up is None else self.up.forward(h))


class UNetDecoder(Module):
    """Upsampling path; level modules are stored coarsest first."""

    def __init__(
        self, config: UNetConfig, *, rng: np.random.Generator, dtype: type[np.floating]
    ) -> None:
        super().__init__()
        self.levels = ModuleList()
        width = config.channels(config.levels - 1)
        for level in reversed(range(config.levels)):
            self.levels.append(DecoderLevel(config, level, width, rng=rng, dtype=dtype))
            width = config.channels(level)

    def forward(
        self, h: Tensor, skips: list[Tensor], temb_act: Tensor, cross_fn: CrossFn
    ) -> tuple[Tensor, tuple[Tensor, ...]]:
        captured: list[Tensor] = []
        for module, skip in zip(self.levels, reversed(skips), strict=True):
            feats, h = module.forward(h, skip, temb_act, cross_fn)
            captured.append(feats)
        return h, tuple(reversed(captured))


class UNet(Module):
    """Epsilon-predicting UNet over ``[B, C, S, S]`` diffusion states."""

    def __init__(
        self,
        config: UNetConfig,
        *,
        rng: np.random.Generator,
        dtype: type[np.floating] = np.float32,
    ) -> None:
        super().__init__()
        self.config = config
        self.time_embedding = TimeEmbedding(config.time_dim, rng=rng, dtype=dtype)
        self.encoder = UNetEncoder(config, rng=rng, dtype=dtype)
        self.middle = MiddleBlock(config, rng=rng, dtype=dtype)
        self.decoder = UNetDecoder(config, rng=rng, dtype=dtype)
        self.norm_out = GroupNorm(config.channels(0), config.groups, dtype=dtype)
        self.conv_out = Conv2d(config.channels(0), config.in_channels, 3, rng=rng, dtype=dtype)

    @property
    def dtype(self) -> np.dtype[np.floating]:
        return self.conv_out.weight.dtype

    def site_names(self) -> list[str]:
        """Cross-attention site names in forward order."""
        return [m.site for m in _walk(self) if isinstance(m, SpatialTransformer)]

    def site_weights(self) -> dict[str, CrossAttentionWeights]:
        return {m.site: m.cross for m in _walk(self) if isinstance(m, SpatialTransformer)}

    def time_embed(self, t: int | np.ndarray, batch: int = 1) -> Tensor:
        return self.time_embedding.forward(batch_timesteps(t, batch, self.config.timesteps))

    def forward(
        self,
        x_t: Tensor,
        t: int | np.ndarray,
        cond: ConditionBundle,
        mode: GenerationMode,
        pose_feats: PoseFeatures | None = None,
        adapters: Mapping[str, AdapterWeights] | None = None,
    ) -> tuple[Tensor, InternalFeatures]:
        """Predict the noise in ``x_t``.

        Raises:
            ContractError: If pose features are passed in text-editing mode or
                the input dtype differs from the weights
            DimensionError: If ``x_t`` or a pose feature has the wrong shape
            ConfigError: If face-generation mode lacks an adapter at some site
        """
        cfg = self.config
        expected = (cfg.in_channels, cfg.image_size, cfg.image_size)
        if x_t.ndim != 4 or x_t.shape[1:] != expected:
            msg = f"x_t must be [B, {expected[0]}, {expected[1]}, {expected[2]}], got {x_t.shape}"
            raise DimensionError(msg)
        if x_t.dtype != self.dtype:
            msg = f"x_t dtype {x_t.dtype} differs from weight dtype {self.dtype}"
            raise ContractError(msg)
        if pose_feats is not None and mode is not GenerationMode.FACE_GENERATION:
            msg = "pose features are only accepted in face_generation mode"
            raise ContractError(msg)
        batch = x_t.shape[0]
        temb_act = ops.silu(self.time_embed(t, batch))
        site_adapters = adapters or {}

        def cross_fn(site: str, f: Tensor, w: CrossAttentionWeights) -> Tensor:
            return mode_dispatch(mode, f, cond, w, site_adapters.get(site))

        h, skips = self.encoder.forward(x_t, temb_act, cross_fn)
        if pose_feats is not None:
            skips = [_inject(s, p) for s, p in zip(skips, pose_feats.skips, strict=True)]
        h = self.middle.forward(h, temb_act, cross_fn)
        if pose_feats is not None and pose_feats.middle is not None:
            h = _inject(h, pose_feats.middle)
        h, captured = self.decoder.forward(h, skips, temb_act, cross_fn)
        eps_hat = self.conv_out.forward(ops.silu(self.norm_out.forward(h)))
        return eps_hat, InternalFeatures(maps=captured, mode=mode)


def _inject(target: Tensor, feature: Tensor) -> Tensor:
    if target.shape != feature.shape:
        msg = f"pose feature {feature.shape} does not match {target.shape}"
        raise DimensionError(msg)
    return ops.add(target, feature)


def _walk(module: Module) -> list[Module]:
    found: list[Module] = [module]
    for _, child in module.children():
        found.extend(_walk(child))
    return found


def time_embed(t: int | np.ndarray, unet: UNet) -> Tensor:
    """Time embedding ``[time_dim]`` of a scalar timestep (``[B, time_dim]`` for arrays)."""
    arr = np.asarray(t)
    out = unet.time_embed(arr, 1 if arr.ndim == 0 else arr.shape[0])
    return ops.reshape(out, (out.shape[1],)) if arr.ndim == 0 else out


def unet_forward(
    unet: UNet,
    x_t: Tensor,
    t: int | np.ndarray,
    cond: ConditionBundle,
    mode: GenerationMode,
    pose_feats: PoseFeatures | None = None,
    adapters: Mapping[str, AdapterWeights] | None = None,
) -> tuple[Tensor, InternalFeatures]:
    return unet.forward(x_t, t, cond, mode, pose_feats, adapters)
