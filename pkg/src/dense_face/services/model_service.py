"""Checkpoint persistence for the composite network.

Bridges ``DenseFaceNetwork`` and the archive format: the tensor table holds
every network parameter plus, after training, the Adam moments under
``optimizer.*``; the metadata holds the architecture, the vocabulary, the
weight groups present, the training configuration and training state.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from dense_face.conditioning import Vocabulary
from dense_face.constants import Constants, TrainPhase
from dense_face.exceptions import ConfigError
from dense_face.network import DenseFaceNetwork, ModelConfig
from dense_face.training import (
    ResumePoint,
    TrainingState,
    TrainResult,
    load_checkpoint,
    save_checkpoint,
    split_optimizer_tensors,
)


@dataclass(frozen=True)
class LoadedModel:
    """A network restored from a checkpoint, with what was stored next to it."""

    network: DenseFaceNetwork
    metadata: dict[str, Any]
    content_hash: str
    optimizer_tensors: dict[str, np.ndarray]

    @property
    def training(self) -> TrainingState | None:
        raw = self.metadata.get("training")
        return None if raw is None else TrainingState.from_dict(raw)

    def resume_point(self, phase: TrainPhase) -> ResumePoint | None:
        """Resume data when this checkpoint was written by ``phase``."""
        state = self.training
        if state is None or state.phase is not phase or not self.optimizer_tensors:
            return None
        return ResumePoint(optimizer_tensors=self.optimizer_tensors, state=state)


class ModelService:
    """Service for saving and loading network checkpoints."""

    @staticmethod
    def build_metadata(network: DenseFaceNetwork, result: TrainResult | None) -> dict[str, Any]:
        meta: dict[str, Any] = {"format": "dense-face", "version": Constants.VERSION}
        meta.update(network.metadata())
        if result is not None:
            meta["train_config"] = result.config.model_dump(mode="json")
            meta["training"] = result.state.to_dict()
            meta["optimizer_step"] = result.optimizer.step_count
        return meta

    @staticmethod
    def save(path: Path, network: DenseFaceNetwork, result: TrainResult | None = None) -> str:
        """Write the network (and optimizer state of ``result``); return the content hash."""
        tensors = network.state_dict()
        if result is not None:
            tensors.update(result.optimizer.state_tensors())
        return save_checkpoint(path, tensors, ModelService.build_metadata(network, result))

    @staticmethod
    def load(path: Path) -> LoadedModel:
        """Rebuild the network stored at ``path``.

        Raises:
            ArtifactIOError: If the file cannot be read
            CheckpointCorruptError: If the archive fails verification
            ConfigError: If the metadata does not describe a dense-face network
        """
        archive = load_checkpoint(path)
        meta = archive.metadata
        try:
            config = ModelConfig.from_dict(meta["model"])
            vocab = Vocabulary(meta["vocabulary"])
            groups = list(meta["groups"])
        except (KeyError, TypeError) as exc:
            msg = f"checkpoint {path} has no dense-face model metadata: {exc}"
            raise ConfigError(msg) from exc
        weights, optimizer = split_optimizer_tensors(archive.tensors)
        network = DenseFaceNetwork.from_tensors(config, vocab, groups, weights)
        return LoadedModel(network, meta, archive.content_hash, optimizer)
