"""Procedural face sprites with exact identity, pose, captions and annotations.

Main Components:
- SpriteSpec / render: deterministic rasterization with ground-truth annotations
- recover_pose: analytic pose inverse used as the pose oracle
- caption_of: templated captions over the closed vocabulary
- generate_dataset / load_dataset: on-disk dataset with identity-disjoint splits
"""

from .captions import CAPTION_TEMPLATE, DIRECTIONS, caption_of, caption_words, direction_of
from .dataset import (
    MANIFEST_NAME,
    SpriteBatch,
    SpriteDataset,
    derive_seed,
    generate_dataset,
    heldout_count,
    identity_params,
    load_dataset,
    read_manifest,
    sample_spec,
    splitmix64,
)
from .models import DatasetEntry, DatasetSummary
from .palettes import (
    BACKGROUND_COLORS,
    EYE_COLORS,
    HAIR_COLORS,
    SKIN_TONES,
    nearest_color,
    palette_index,
)
from .renderer import (
    ID_PARAM_NAMES,
    FaceGeometry,
    SpriteSample,
    SpriteSpec,
    recover_pose,
    render,
    sprite_landmarks,
)

__all__ = [
    "BACKGROUND_COLORS",
    "CAPTION_TEMPLATE",
    "DIRECTIONS",
    "EYE_COLORS",
    "HAIR_COLORS",
    "ID_PARAM_NAMES",
    "MANIFEST_NAME",
    "SKIN_TONES",
    "DatasetEntry",
    "DatasetSummary",
    "FaceGeometry",
    "SpriteBatch",
    "SpriteDataset",
    "SpriteSample",
    "SpriteSpec",
    "caption_of",
    "caption_words",
    "derive_seed",
    "direction_of",
    "generate_dataset",
    "heldout_count",
    "identity_params",
    "load_dataset",
    "nearest_color",
    "palette_index",
    "read_manifest",
    "recover_pose",
    "render",
    "sample_spec",
    "splitmix64",
]
