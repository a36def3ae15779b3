"""Pydantic models for configuration files and run records.

``TrainConfig`` is flat so every key maps one-to-one onto a config-file key
and a CLI flag. Architecture keys only take effect in the base phase; later
phases inherit the architecture stored in the base checkpoint.
"""

from __future__ import annotations

from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator

from dense_face.constants import Constants


class TrainConfig(BaseModel):
    """Resolved training configuration."""

    model_config = ConfigDict(extra="forbid")

    phase: Literal["base", "adapter", "identity"] = Field(
        default="base", description="Which parameter groups are trained"
    )
    steps: int = Field(default=1000, ge=1, description="Optimizer steps")
    batch_size: int = Field(default=Constants.BATCH_SIZE, ge=1, description="Samples per step")
    learning_rate: float = Field(
        default=Constants.LEARNING_RATE, gt=0, description="Adam step size"
    )
    seed: int = Field(default=0, ge=0, description="Seed for initialization, batches and noise")
    caption_dropout: float = Field(
        default=Constants.CAPTION_DROPOUT,
        ge=0.0,
        le=1.0,
        description="Probability of replacing a caption by the empty caption (base phase)",
    )
    w_lmk: float = Field(default=Constants.W_LMK, ge=0, description="Landmark heatmap loss weight")
    w_mask: float = Field(default=Constants.W_MASK, ge=0, description="Mask BCE loss weight")
    w_depth: float = Field(default=Constants.W_DEPTH, ge=0, description="Depth L1 loss weight")
    annotation_t_fraction: float = Field(
        default=Constants.ANNOTATION_T_FRACTION,
        ge=0.0,
        le=1.0,
        description="Annotation loss applies to samples with t <= fraction * T",
    )
    eval_interval: int = Field(default=200, ge=1, description="Steps between held-out evaluations")
    log_interval: int = Field(default=50, ge=1, description="Steps between loss log lines")
    heldout_batch: int = Field(default=8, ge=1, description="Held-out samples per evaluation")
    deterministic: bool = Field(
        default=False, description="Single-threaded data loading for bit-exact reruns"
    )
    lambda_id: float = Field(
        default=Constants.LAMBDA_ID, ge=0, description="Identity offset scale"
    )
    use_pose_token: bool = Field(default=True, description="Append the pose token")
    use_pose_branch: bool = Field(default=True, description="Inject pose-branch features")
    pose_branch_middle: bool = Field(
        default=True, description="Copy the middle block into the branch"
    )
    zero_init_injection: bool = Field(
        default=False, description="Start pose injections at zero instead of 0.1 * I"
    )
    schedule: Literal["cosine", "linear"] = Field(default="cosine", description="Noise schedule")
    timesteps: int = Field(default=Constants.TRAIN_TIMESTEPS, ge=Constants.MIN_TIMESTEPS)
    image_size: int = Field(default=Constants.IMAGE_SIZE, ge=8)
    base_channels: int = Field(default=Constants.BASE_CHANNELS, ge=1)
    channel_mults: list[int] = Field(default_factory=lambda: list(Constants.CHANNEL_MULTS))
    blocks_per_level: int = Field(default=Constants.BLOCKS_PER_LEVEL, ge=1)
    heads: int = Field(default=Constants.ATTENTION_HEADS, ge=1)
    head_dim: int = Field(default=Constants.HEAD_DIM, ge=1)
    groups: int = Field(default=Constants.NORM_GROUPS, ge=1)
    time_dim: int = Field(default=Constants.TIME_DIM, ge=2)
    text_dim: int = Field(default=Constants.TEXT_DIM, ge=2)
    id_dim: int = Field(default=Constants.ID_DIM, ge=1)
    text_layers: int = Field(default=Constants.TEXT_LAYERS, ge=0)
    max_tokens: int = Field(default=Constants.MAX_TOKENS, ge=3)
    dtype: Literal["float32", "float64"] = Field(default="float32", description="Weight dtype")

    @field_validator("channel_mults", mode="before")
    @classmethod
    def _split_mults(cls, value: Any) -> Any:
        if isinstance(value, str):
            return [int(part) for part in value.replace(" ", "").split(",") if part]
        return value


class RunManifest(BaseModel):
    """Record of one CLI command, written on success and on failure."""

    command: str = Field(description="Subcommand name")
    version: str = Field(default=Constants.VERSION, description="dense-face version")
    config: dict[str, Any] = Field(default_factory=dict, description="Every resolved parameter")
    seeds: dict[str, int] = Field(default_factory=dict, description="Seeds used by the run")
    checkpoints: dict[str, str] = Field(
        default_factory=dict, description="Checkpoint path -> content hash"
    )
    artifacts: dict[str, str] = Field(default_factory=dict, description="Artifact role -> path")
    started_at: str = Field(description="ISO-8601 UTC start time")
    finished_at: str | None = Field(default=None, description="ISO-8601 UTC end time")
    wall_clock_sec: float | None = Field(default=None, description="Elapsed seconds")
    status: Literal["running", "ok", "error"] = Field(default="running")
    exit_code: int | None = Field(default=None, description="Process exit code")
    error: str | None = Field(default=None, description="Error message on failure")
