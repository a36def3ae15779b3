"""Denoiser architecture configuration."""

from __future__ import annotations

from dataclasses import dataclass

from dense_face.constants import Constants
from dense_face.exceptions import ConfigError


@dataclass(frozen=True)
class UNetConfig:
    """Sizes and switches of the denoising UNet and its pose branch.

    Level ``l`` runs at ``image_size / 2**l`` pixels with
    ``base_channels * channel_mults[l]`` channels. Cross-attention runs at
    levels ``>= attention_min_level``; self-attention only at levels
    ``>= self_attention_min_level`` (quadratic in pixel count).

    Attributes:
        pose_branch_middle: Include the copied middle block in the pose branch
        zero_init_injection: Start the pose injection projections at zero
            instead of ``0.1 * I``
    """

    image_size: int = Constants.IMAGE_SIZE
    in_channels: int = Constants.IMAGE_CHANNELS
    base_channels: int = Constants.BASE_CHANNELS
    channel_mults: tuple[int, ...] = Constants.CHANNEL_MULTS
    blocks_per_level: int = Constants.BLOCKS_PER_LEVEL
    heads: int = Constants.ATTENTION_HEADS
    head_dim: int = Constants.HEAD_DIM
    time_dim: int = Constants.TIME_DIM
    groups: int = Constants.NORM_GROUPS
    context_dim: int = Constants.TEXT_DIM
    timesteps: int = Constants.TRAIN_TIMESTEPS
    attention_min_level: int = 1
    self_attention_min_level: int = 2
    pose_branch_middle: bool = True
    zero_init_injection: bool = False

    def __post_init__(self) -> None:
        if not self.channel_mults or any(m <= 0 for m in self.channel_mults):
            msg = f"channel_mults must be positive, got {self.channel_mults}"
            raise ConfigError(msg)
        if self.blocks_per_level < 1:
            msg = "blocks_per_level must be at least 1"
            raise ConfigError(msg)
        stride = 2 ** (self.levels - 1)
        if self.image_size <= 0 or self.image_size % stride:
            msg = f"image_size {self.image_size} not divisible by 2^(levels-1) = {stride}"
            raise ConfigError(msg)
        for level in range(self.levels):
            width = self.channels(level)
            if width % self.groups:
                msg = f"level {level} width {width} not divisible by {self.groups} groups"
                raise ConfigError(msg)
        if self.time_dim % 2:
            msg = f"time_dim must be even, got {self.time_dim}"
            raise ConfigError(msg)
        if self.timesteps < Constants.MIN_TIMESTEPS:
            msg = f"timesteps must be >= {Constants.MIN_TIMESTEPS}, got {self.timesteps}"
            raise ConfigError(msg)

    @property
    def levels(self) -> int:
        return len(self.channel_mults)

    def channels(self, level: int) -> int:
        return self.base_channels * self.channel_mults[level]

    def resolution(self, level: int) -> int:
        return self.image_size // 2**level

    def has_cross_attention(self, level: int) -> bool:
        return level >= self.attention_min_level

    def has_self_attention(self, level: int) -> bool:
        return level >= self.self_attention_min_level
