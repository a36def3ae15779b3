"""Training for dense-face.

Main Components:
- Trainer / train_phase_base / train_phase_adapter / train_phase_identity:
  the phase-driven training loop and its entry points
- diffusion_loss / adapter_loss / cosine_distance_loss: objectives
- Adam: optimizer with checkpointable moments
- save_checkpoint / load_checkpoint / CheckpointArchive: the named-tensor
  archive format with content hashing and atomic writes
- TrainingState: progress and loss history stored with each checkpoint
"""

from .checkpoint import (
    CheckpointArchive,
    TensorEntry,
    content_hash,
    decode_archive,
    encode_archive,
    load_checkpoint,
    read_checkpoint_bytes,
    save_checkpoint,
)
from .losses import (
    Denoiser,
    DiffusionTerms,
    StepLosses,
    adapter_loss,
    annotated_rows,
    cosine_distance_loss,
    diffusion_loss,
)
from .optimizer import Adam, split_optimizer_tensors
from .state import TrainingState, TrainingStatus
from .trainer import (
    ResumePoint,
    Trainer,
    TrainResult,
    new_network,
    train_phase_adapter,
    train_phase_base,
    train_phase_identity,
)

__all__ = [
    "Adam",
    "CheckpointArchive",
    "Denoiser",
    "DiffusionTerms",
    "ResumePoint",
    "StepLosses",
    "TensorEntry",
    "TrainResult",
    "Trainer",
    "TrainingState",
    "TrainingStatus",
    "adapter_loss",
    "annotated_rows",
    "content_hash",
    "cosine_distance_loss",
    "decode_archive",
    "diffusion_loss",
    "encode_archive",
    "load_checkpoint",
    "new_network",
    "read_checkpoint_bytes",
    "save_checkpoint",
    "split_optimizer_tensors",
    "train_phase_adapter",
    "train_phase_base",
    "train_phase_identity",
]
