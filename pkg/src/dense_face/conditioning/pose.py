"""Head pose conditions, pose tokens and pose images.

Pose enters conditioning twice: as one learned token appended to the text
sequence and as a constant three-channel image fed to the pose branch.
Angles are degrees in (yaw, pitch, roll) order and normalized by 45.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass
import math

import numpy as np

from dense_face.constants import Constants
from dense_face.exceptions import DomainError
from dense_face.tensor_core import Linear, Module, Tensor, ops


@dataclass(frozen=True)
class PoseCondition:
    """Euler angles in degrees, each in ``[-45, 45]``."""

    yaw: float = 0.0
    pitch: float = 0.0
    roll: float = 0.0

    def __post_init__(self) -> None:
        limit = Constants.POSE_LIMIT_DEG
        for name in ("yaw", "pitch", "roll"):
            value = getattr(self, name)
            if not math.isfinite(value) or abs(value) > limit:
                msg = f"{name}={value} outside [-{limit:g}, {limit:g}] degrees"
                raise DomainError(msg)

    @classmethod
    def parse(cls, text: str) -> PoseCondition:
        """Parse ``"yaw,pitch,roll"``."""
        parts = [p.strip() for p in text.split(",")]
        if len(parts) != 3:
            msg = f"pose must be 'yaw,pitch,roll', got '{text}'"
            raise DomainError(msg)
        try:
            yaw, pitch, roll = (float(p) for p in parts)
        except ValueError as exc:
            msg = f"pose must be three numbers, got '{text}'"
            raise DomainError(msg) from exc
        return cls(yaw, pitch, roll)

    def as_array(self) -> np.ndarray:
        return np.array([self.yaw, self.pitch, self.roll], dtype=np.float64)

    def normalized(self) -> np.ndarray:
        return self.as_array() / Constants.POSE_LIMIT_DEG


class PoseProjection(Module):
    """Affine map of normalized angles into the text space."""

    def __init__(
        self,
        *,
        text_dim: int = Constants.TEXT_DIM,
        rng: np.random.Generator,
        dtype: type[np.floating] = np.float32,
    ) -> None:
        super().__init__()
        self.proj = Linear(3, text_dim, rng=rng, dtype=dtype)

    def forward(self, poses: Sequence[PoseCondition]) -> Tensor:
        """Tokens ``[B, k]`` for a batch of poses."""
        angles = np.stack([p.normalized() for p in poses])
        return self.proj.forward(Tensor(angles, dtype=self.proj.weight.dtype))


def pose_token(pose: PoseCondition, projection: PoseProjection) -> Tensor:
    """Token ``[k]`` of a single pose; the zero pose maps to the projection bias."""
    token = projection.forward([pose])
    return ops.reshape(token, (token.shape[1],))


def pose_to_image(
    pose: PoseCondition,
    size: int = Constants.IMAGE_SIZE,
    dtype: type[np.floating] = np.float32,
) -> Tensor:
    """Constant ``[3, size, size]`` image with channels (yaw, pitch, roll) / 45."""
    values = pose.normalized()
    return Tensor(np.broadcast_to(values[:, None, None], (3, size, size)), dtype=dtype)


def pose_images(
    poses: Sequence[PoseCondition],
    size: int = Constants.IMAGE_SIZE,
    dtype: type[np.floating] = np.float32,
) -> Tensor:
    """Batched ``[B, 3, size, size]`` pose images."""
    values = np.stack([p.normalized() for p in poses])
    shape = (len(poses), 3, size, size)
    return Tensor(np.broadcast_to(values[:, :, None, None], shape), dtype=dtype)
