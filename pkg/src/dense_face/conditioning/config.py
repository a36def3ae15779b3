"""Conditioning configuration."""

from __future__ import annotations

from dataclasses import dataclass

from dense_face.constants import Constants
from dense_face.exceptions import ConfigError


@dataclass(frozen=True)
class ConditioningConfig:
    """Sizes of the text, identity and pose conditioning paths.

    Attributes:
        text_dim: Width ``k`` of the text space
        id_dim: Width ``d`` of the identity space
        max_tokens: Tokenized caption length ``L``
        text_layers: Self-attention blocks in the text encoder
        heads: Attention heads in the text encoder
        head_dim: Per-head width in the text encoder
        lambda_id: Scale of the identity offset added to the ``face`` embedding
        use_pose_token: Append the learned pose token in face-generation mode
    """

    text_dim: int = Constants.TEXT_DIM
    id_dim: int = Constants.ID_DIM
    max_tokens: int = Constants.MAX_TOKENS
    text_layers: int = Constants.TEXT_LAYERS
    heads: int = Constants.ATTENTION_HEADS
    head_dim: int = Constants.HEAD_DIM
    lambda_id: float = Constants.LAMBDA_ID
    use_pose_token: bool = True

    def __post_init__(self) -> None:
        if self.max_tokens < 3:
            msg = f"max_tokens must be at least 3, got {self.max_tokens}"
            raise ConfigError(msg)
        if self.text_dim % 2 or self.text_dim <= 0:
            msg = f"text_dim must be a positive even number, got {self.text_dim}"
            raise ConfigError(msg)
        if self.id_dim <= 0 or self.heads <= 0 or self.head_dim <= 0 or self.text_layers < 0:
            msg = "conditioning sizes must be positive"
            raise ConfigError(msg)
        if self.lambda_id < 0:
            msg = f"lambda_id must be >= 0, got {self.lambda_id}"
            raise ConfigError(msg)
