"""Generation requests and their results."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from dense_face.annotations import AnnotationSet
from dense_face.conditioning import PoseCondition
from dense_face.constants import Constants, MaskSource
from dense_face.exceptions import ConfigError

GenerateMode = Literal["text", "face", "personalized"]


class GenerationRequest(BaseModel):
    """Everything one generation run depends on besides the checkpoint.

    Exactly one identity source is needed for the ``face`` and
    ``personalized`` modes; ``text`` ignores identity and pose.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    mode: GenerateMode = Field(default="text", description="Generation entry point")
    caption: str = Field(default="", description="Caption from the template grammar")
    id_params: list[float] | None = Field(
        default=None, description="Sprite identity parameters (oracle embedding)"
    )
    id_image: str | None = Field(
        default=None, description="Reference face crop, embedded by the identity encoder"
    )
    id_embedding: list[float] | None = Field(
        default=None, description="Stored identity embedding, normalized before use"
    )
    pose: tuple[float, float, float] | None = Field(
        default=None, description="Yaw, pitch, roll in degrees; (0, 0, 0) when absent"
    )
    seed: int = Field(default=0, ge=0, description="Seed of every noise draw in the run")
    steps: int = Field(default=Constants.INFERENCE_STEPS, ge=1, description="DDIM steps")
    guidance: float = Field(
        default=Constants.GUIDANCE_SCALE, ge=0.0, description="Classifier-free guidance scale"
    )
    eta: float = Field(default=0.0, ge=0.0, le=1.0, description="DDIM stochasticity")
    mask: MaskSource = Field(default=MaskSource.PREDICTED, description="Blend mask source")
    mask_path: str | None = Field(default=None, description="Mask image for the file source")
    lambda_id: float | None = Field(
        default=None, description="Override of the identity-embedding mixing weight"
    )
    use_pose_token: bool | None = Field(default=None, description="Override of the pose token")
    use_pose_branch: bool | None = Field(
        default=None, description="Override of the pose-branch injection"
    )

    @property
    def pose_condition(self) -> PoseCondition:
        return PoseCondition(*self.pose) if self.pose is not None else PoseCondition(0, 0, 0)

    def identity_sources(self) -> list[str]:
        given = {
            "id_params": self.id_params,
            "id_image": self.id_image,
            "id_embedding": self.id_embedding,
        }
        return [name for name, value in given.items() if value is not None]

    def check(self) -> None:
        """Validate mode-dependent requirements.

        Raises:
            ConfigError: If a face mode lacks exactly one identity source, or
                the file mask source has no path
        """
        if self.mode != "text":
            sources = self.identity_sources()
            if len(sources) != 1:
                msg = (
                    f"{self.mode} mode needs exactly one identity source "
                    f"(id_params, id_image or id_embedding), got {sources or 'none'}"
                )
                raise ConfigError(msg)
        if self.mode == "personalized" and self.mask is MaskSource.FILE and not self.mask_path:
            msg = "the file mask source needs a mask path"
            raise ConfigError(msg)


@dataclass(frozen=True)
class BlendMask:
    """Hard ``[S, S]`` mask; True marks the face region that is regenerated."""

    values: np.ndarray
    source: MaskSource
    fell_back: bool = False

    @property
    def coverage(self) -> float:
        return float(self.values.mean())


@dataclass(frozen=True)
class GenerationResult:
    """Decoded images plus the float states they were decoded from.

    ``base`` and ``mask`` are set only by the personalized pipeline;
    ``annotations`` only by the face modes.
    """

    image: np.ndarray
    state: np.ndarray
    annotations: AnnotationSet | None = None
    base: np.ndarray | None = None
    base_state: np.ndarray | None = None
    mask: BlendMask | None = None
