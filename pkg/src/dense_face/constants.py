"""Constants and enums for dense-face.

This module holds the default sizes, numerical tolerances and named modes
shared across the package. Values here are defaults; most are exposed as
configuration keys through ``TrainConfig`` or ``UNetConfig``.
"""

from __future__ import annotations

from enum import Enum
from typing import Final


class Constants:
    """Configuration constants for dense-face."""

    VERSION: Final[str] = "0.1.0"

    # Image frame
    IMAGE_SIZE: Final[int] = 64
    IMAGE_CHANNELS: Final[int] = 3

    # Diffusion schedule
    TRAIN_TIMESTEPS: Final[int] = 1000
    MIN_TIMESTEPS: Final[int] = 10
    INFERENCE_STEPS: Final[int] = 25
    COSINE_OFFSET: Final[float] = 0.008
    COSINE_MAX_BETA: Final[float] = 0.999
    LINEAR_BETA_START: Final[float] = 1e-4
    LINEAR_BETA_END: Final[float] = 0.02

    # Conditioning
    MAX_TOKENS: Final[int] = 16
    TEXT_DIM: Final[int] = 64
    ID_DIM: Final[int] = 32
    ID_PARAM_COUNT: Final[int] = 8
    VOCAB_LIMIT: Final[int] = 128
    LAMBDA_ID: Final[float] = 1e-2
    POSE_LIMIT_DEG: Final[float] = 45.0
    TEXT_LAYERS: Final[int] = 2
    ORACLE_SEED: Final[int] = 20240917
    ORACLE_HIDDEN: Final[int] = 64
    ID_CROP_SIZE: Final[int] = 32

    # Attention
    ATTENTION_HEADS: Final[int] = 4
    HEAD_DIM: Final[int] = 16

    # UNet
    BASE_CHANNELS: Final[int] = 32
    CHANNEL_MULTS: Final[tuple[int, ...]] = (1, 2, 4)
    BLOCKS_PER_LEVEL: Final[int] = 2
    TIME_DIM: Final[int] = 128
    NORM_GROUPS: Final[int] = 8
    INJECTION_INIT_GAIN: Final[float] = 0.1

    # Dense heads
    LANDMARK_COUNT: Final[int] = 5
    HEATMAP_SIGMA: Final[float] = 1.0
    PROB_CLAMP: Final[float] = 1e-7
    W_LMK: Final[float] = 1.0
    W_MASK: Final[float] = 1.0
    W_DEPTH: Final[float] = 0.5
    ANNOTATION_T_FRACTION: Final[float] = 0.5

    # Generation
    GUIDANCE_SCALE: Final[float] = 3.0
    MASK_THRESHOLD: Final[float] = 0.5
    MASK_DILATION_PX: Final[int] = 2
    MASK_PROBE_FRACTION: Final[float] = 0.3
    BLEND_ELLIPSE_A: Final[float] = 20.0
    BLEND_ELLIPSE_B: Final[float] = 24.0

    # Synthetic sprites
    POSE_SHIFT_PX: Final[float] = 10.0
    POSES_PER_IDENTITY: Final[int] = 10
    HELDOUT_FRACTION: Final[float] = 0.1
    DIRECTION_THRESHOLD_DEG: Final[float] = 15.0

    # Training
    BATCH_SIZE: Final[int] = 16
    LEARNING_RATE: Final[float] = 1e-4
    CAPTION_DROPOUT: Final[float] = 0.1
    ADAM_BETA1: Final[float] = 0.9
    ADAM_BETA2: Final[float] = 0.999
    ADAM_EPS: Final[float] = 1e-8

    # Checkpoint format
    CHECKPOINT_MAGIC: Final[bytes] = b"DFCK"
    CHECKPOINT_VERSION: Final[int] = 1
    CHECKPOINT_ALIGN: Final[int] = 64

    # Environment
    ENV_THREADS: Final[str] = "DENSEFACE_THREADS"
    ENV_LOG_LEVEL: Final[str] = "DENSEFACE_LOG_LEVEL"


class GenerationMode(Enum):
    """Forward-pass variant of the denoiser."""

    TEXT_EDITING = "text_editing"
    FACE_GENERATION = "face_generation"


class ScheduleKind(Enum):
    """Noise schedule family."""

    LINEAR = "linear"
    COSINE = "cosine"


class MaskSource(Enum):
    """Where the personalized pipeline takes its blend mask from."""

    PREDICTED = "predicted"
    ELLIPSE = "ellipse"
    FILE = "file"


class TrainPhase(Enum):
    """Training phase; determines which parameter groups receive gradients."""

    BASE = "base"
    ADAPTER = "adapter"
    IDENTITY = "identity"
