"""Mini denoising UNet and its pose branch.

Main Components:
- UNetConfig: architecture sizes and ablation switches
- UNet / unet_forward: epsilon prediction with internal feature capture
- time_embed: sinusoidal timestep embedding plus MLP
- PoseBranch / pose_branch_forward: copied encoder half with pose-feature injection
"""

from .blocks import (
    Downsample,
    ResBlock,
    SpatialTransformer,
    TimeEmbedding,
    Upsample,
    timestep_features,
)
from .config import UNetConfig
from .model import (
    MIDDLE_SITE,
    InternalFeatures,
    PoseFeatures,
    UNet,
    batch_timesteps,
    time_embed,
    unet_forward,
)
from .pose_branch import PoseBranch, pose_branch_forward

__all__ = [
    "MIDDLE_SITE",
    "Downsample",
    "InternalFeatures",
    "PoseBranch",
    "PoseFeatures",
    "ResBlock",
    "SpatialTransformer",
    "TimeEmbedding",
    "UNet",
    "UNetConfig",
    "Upsample",
    "batch_timesteps",
    "pose_branch_forward",
    "time_embed",
    "timestep_features",
    "unet_forward",
]
