"""Pose branch: a trainable copy of the UNet encoder fed a head-pose image.

The branch copies the main encoder (and, by default, the middle block)
weight for weight, so it starts as the trained first half of the UNet. Its
per-level outputs pass through 1x1 projections that start at ``0.1 * I``
(no zero gate) and are added to the main network's skip tensors.
"""

from __future__ import annotations

import copy
from typing import TYPE_CHECKING

import numpy as np

from dense_face.attention import CrossAttentionWeights, cross_attention
from dense_face.constants import Constants
from dense_face.exceptions import DimensionError
from dense_face.tensor_core import Conv2d, Module, ModuleList, Parameter, Tensor, ops

from .model import PoseFeatures, UNet

if TYPE_CHECKING:
    from dense_face.conditioning import ConditionBundle


def _injection(channels: int, gain: float, dtype: np.dtype[np.floating]) -> Conv2d:
    conv = Conv2d(channels, channels, 1, rng=np.random.default_rng(0), padding=0)
    weight = (gain * np.eye(channels)).reshape(channels, channels, 1, 1)
    conv.weight = Parameter(weight.astype(dtype))
    conv.bias = Parameter(np.zeros(channels, dtype=dtype))
    return conv


class PoseBranch(Module):
    """Copied encoder half plus injection projections."""

    def __init__(self, unet: UNet) -> None:
        super().__init__()
        cfg = unet.config
        self.config = cfg
        self.encoder = copy.deepcopy(unet.encoder)
        self.middle = copy.deepcopy(unet.middle) if cfg.pose_branch_middle else None
        self.unfreeze()
        gain = 0.0 if cfg.zero_init_injection else Constants.INJECTION_INIT_GAIN
        dtype = unet.dtype
        self.injections = ModuleList(
            _injection(cfg.channels(level), gain, dtype) for level in range(cfg.levels)
        )
        coarsest = cfg.channels(cfg.levels - 1)
        self.middle_injection = (
            _injection(coarsest, gain, dtype) if cfg.pose_branch_middle else None
        )

    def forward(self, pose_image: Tensor, temb_act: Tensor, cond: ConditionBundle) -> PoseFeatures:
        cfg = self.config
        x = pose_image if pose_image.ndim == 4 else ops.reshape(pose_image, (1, *pose_image.shape))
        expected = (cfg.in_channels, cfg.image_size, cfg.image_size)
        if x.ndim != 4 or x.shape[1:] != expected:
            msg = f"pose image must be [B, *{expected}], got {pose_image.shape}"
            raise DimensionError(msg)

        def cross_fn(site: str, f: Tensor, w: CrossAttentionWeights) -> Tensor:
            return cross_attention(f, cond, w)

        h, skips = self.encoder.forward(x, temb_act, cross_fn)
        projected = tuple(
            inj.forward(s) for inj, s in zip(self.injections, skips, strict=True)
        )
        middle = None
        if self.middle is not None and self.middle_injection is not None:
            middle = self.middle_injection.forward(self.middle.forward(h, temb_act, cross_fn))
        return PoseFeatures(skips=projected, middle=middle)


def pose_branch_forward(
    pose_image: Tensor,
    t: int | np.ndarray,
    cond: ConditionBundle,
    pb: PoseBranch,
    unet: UNet,
) -> PoseFeatures:
    """Run the pose branch with the main UNet's time embedding.

    Raises:
        DimensionError: If the pose image is not ``[B, 3, S, S]``
    """
    batch = pose_image.shape[0] if pose_image.ndim == 4 else 1
    temb_act = ops.silu(unet.time_embed(t, batch))
    return pb.forward(pose_image, temb_act, cond)
