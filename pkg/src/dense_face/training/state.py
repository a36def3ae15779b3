"""Typed training state.

Snapshot of one training run's progress and loss history. It travels in
checkpoint metadata so a resumed run continues the same history. Wall-clock
times stay out of it (they belong to the run manifest) so that two runs
with the same seed produce byte-identical checkpoints.
"""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, replace
from enum import Enum
from typing import Any

from dense_face.constants import TrainPhase
from dense_face.exceptions import ConfigError


class TrainingStatus(Enum):
    """Lifecycle of a training run."""

    IDLE = "idle"
    RUNNING = "running"
    COMPLETED = "completed"


@dataclass(frozen=True)
class TrainingState:
    """Snapshot of training progress."""

    phase: TrainPhase
    status: TrainingStatus = TrainingStatus.IDLE
    step: int = 0
    loss_history: tuple[float, ...] = ()
    heldout_history: tuple[tuple[int, float], ...] = ()

    def advance(self, loss: float) -> TrainingState:
        return replace(self, step=self.step + 1, loss_history=(*self.loss_history, loss))

    def with_heldout(self, loss: float) -> TrainingState:
        return replace(self, heldout_history=(*self.heldout_history, (self.step, loss)))

    def with_status(self, status: TrainingStatus) -> TrainingState:
        return replace(self, status=status)

    def to_dict(self) -> dict[str, Any]:
        return {
            "phase": self.phase.value,
            "status": self.status.value,
            "step": self.step,
            "loss_history": list(self.loss_history),
            "heldout_history": [[s, v] for s, v in self.heldout_history],
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> TrainingState:
        try:
            return cls(
                phase=TrainPhase(data["phase"]),
                status=TrainingStatus(data["status"]),
                step=int(data["step"]),
                loss_history=tuple(float(v) for v in data["loss_history"]),
                heldout_history=tuple((int(s), float(v)) for s, v in data["heldout_history"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            msg = f"invalid training state in checkpoint metadata: {exc}"
            raise ConfigError(msg) from exc
