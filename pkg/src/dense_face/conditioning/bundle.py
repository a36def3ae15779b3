"""Assembly of the cross-attention condition sequence.

The bundle is ``[c; c'; pose_token]``: ``L`` text tokens, then the identity
text embedding, then the pose token. Its mask marks which keys
cross-attention may read. In text-editing mode the last two slots are
always masked; in face-generation mode they are active whenever present.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from dense_face.constants import GenerationMode
from dense_face.exceptions import ConfigError, DimensionError
from dense_face.tensor_core import Tensor, ops

from .identity import IdentityTextEmbedding
from .text_encoder import TextEmbedding

EXTRA_SLOTS = 2


@dataclass(frozen=True)
class ConditionBundle:
    """Condition tokens ``[B, L+2, k]`` with key mask ``[B, L+2]``."""

    tokens: Tensor
    mask: np.ndarray
    mode: GenerationMode
    text_length: int

    @property
    def batch(self) -> int:
        return self.tokens.shape[0]

    @property
    def dim(self) -> int:
        return self.tokens.shape[2]

    def text_mask(self) -> np.ndarray:
        """The mask restricted to the text positions."""
        keep = self.mask.copy()
        keep[:, self.text_length :] = False
        return keep


def _slot(value: Tensor | None, batch: int, dim: int, dtype: np.dtype, what: str) -> Tensor:
    if value is None:
        return Tensor(np.zeros((batch, 1, dim), dtype=dtype))
    row = value if value.ndim == 2 else ops.reshape(value, (1, value.shape[-1]))
    if row.shape[-1] != dim:
        msg = f"{what} width {row.shape[-1]} does not match text width {dim}"
        raise DimensionError(msg)
    if row.shape[0] != batch:
        msg = f"{what} batch {row.shape[0]} does not match text batch {batch}"
        raise DimensionError(msg)
    return ops.reshape(row, (batch, 1, dim))


def build_condition(
    text: TextEmbedding,
    mode: GenerationMode,
    idtext: IdentityTextEmbedding | None = None,
    pose_tok: Tensor | None = None,
) -> ConditionBundle:
    """Concatenate text, identity and pose tokens and derive the key mask.

    Args:
        text: Encoded captions
        mode: Generation mode that decides the mask of the last two slots
        idtext: Identity text embedding; required in face-generation mode
        pose_tok: Pose token ``[k]`` or ``[B, k]``; an absent token leaves its
            slot zero and masked

    Raises:
        ConfigError: If face-generation mode lacks an identity text embedding
        DimensionError: If a part's width or batch disagrees with the text
    """
    if mode is GenerationMode.FACE_GENERATION and idtext is None:
        msg = "face_generation mode requires an identity text embedding"
        raise ConfigError(msg)
    batch, length, dim = text.tokens.shape
    dtype = text.tokens.dtype
    c_prime = None if idtext is None else idtext.c_prime
    id_slot = _slot(c_prime, batch, dim, dtype, "identity token")
    pose_slot = _slot(pose_tok, batch, dim, dtype, "pose token")
    tokens = ops.concat([text.tokens, id_slot, pose_slot], axis=1)

    mask = np.zeros((batch, length + EXTRA_SLOTS), dtype=bool)
    mask[:, :length] = text.mask
    if mode is GenerationMode.FACE_GENERATION:
        mask[:, length] = True
        mask[:, length + 1] = pose_tok is not None
    return ConditionBundle(tokens=tokens, mask=mask, mode=mode, text_length=length)
