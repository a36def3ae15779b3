"""Text, identity and pose conditioning.

Main Components:
- Vocabulary / tokenize: closed caption vocabulary and fixed-length ids
- TextEncoder: stand-in text encoder producing ``c``
- IdentityOracle / IdentityImageEncoder: unit-norm identity embeddings
- IdentityMLP / identity_text_embedding: ``c' = lambda * MLP(c_id) + c_face``
- PoseCondition / PoseProjection: pose token and pose image
- build_condition: the ``[c; c'; pose]`` bundle with its mode-dependent mask
"""

from .bundle import ConditionBundle, build_condition
from .config import ConditioningConfig
from .identity import (
    IdentityImageEncoder,
    IdentityMLP,
    IdentityOracle,
    IdentityTextEmbedding,
    encode_identity_image,
    encode_identity_oracle,
    identity_text_embedding,
)
from .pose import PoseCondition, PoseProjection, pose_images, pose_to_image, pose_token
from .text_encoder import TextEmbedding, TextEncoder, encode_text, sinusoidal_positions
from .vocabulary import (
    BOS,
    EOS,
    FACE,
    PAD,
    Vocabulary,
    detokenize,
    token_mask,
    tokenize,
    tokenize_batch,
)

__all__ = [
    "BOS",
    "EOS",
    "FACE",
    "PAD",
    "ConditionBundle",
    "ConditioningConfig",
    "IdentityImageEncoder",
    "IdentityMLP",
    "IdentityOracle",
    "IdentityTextEmbedding",
    "PoseCondition",
    "PoseProjection",
    "TextEmbedding",
    "TextEncoder",
    "Vocabulary",
    "build_condition",
    "detokenize",
    "encode_identity_image",
    "encode_identity_oracle",
    "encode_text",
    "identity_text_embedding",
    "pose_images",
    "pose_to_image",
    "pose_token",
    "sinusoidal_positions",
    "token_mask",
    "tokenize",
    "tokenize_batch",
]
