"""Phase-driven training loop.

Three phases share one loop and differ in the parameters they unfreeze and
the objective they minimize:

- base: text encoder and UNet on the diffusion loss, with caption dropout
- adapter: adapters, identity MLP, pose projection, pose branch and dense
  heads on the face-generation diffusion loss plus the gated annotation loss;
  every base parameter stays frozen
- identity: the evaluation image encoder on the cosine distance to the
  oracle embedding of mask-bounding-box crops

Batches and noise for step ``s`` come from a generator seeded by
``(seed, phase, s)``, so a run resumed from a checkpoint (weights, Adam
moments and step count) continues exactly as the uninterrupted run would.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Final

from fastmcp.utilities.logging import get_logger
import numpy as np
from tqdm import tqdm

from dense_face.conditioning import Vocabulary
from dense_face.constants import Constants, GenerationMode, TrainPhase
from dense_face.dense_heads import AnnotationWeights, encode_targets
from dense_face.exceptions import ConfigError
from dense_face.imaging import crop_to_mask
from dense_face.models import TrainConfig
from dense_face.network import DenseFaceNetwork, ModelConfig
from dense_face.schedulers import make_schedule
from dense_face.synthfaces import SpriteBatch, SpriteDataset, caption_words
from dense_face.tensor_core import Tensor, backward, no_grad

from .losses import StepLosses, adapter_loss, cosine_distance_loss, diffusion_loss
from .optimizer import Adam
from .state import TrainingState, TrainingStatus

_logger = get_logger(__name__)

_PHASE_STREAM: Final[dict[TrainPhase, int]] = {
    TrainPhase.BASE: 11,
    TrainPhase.ADAPTER: 12,
    TrainPhase.IDENTITY: 13,
}
_HELDOUT_STREAM: Final[int] = 99


@dataclass(frozen=True)
class ResumePoint:
    """Optimizer moments and progress loaded from a same-phase checkpoint."""

    optimizer_tensors: dict[str, np.ndarray]
    state: TrainingState


@dataclass(frozen=True)
class TrainResult:
    network: DenseFaceNetwork
    optimizer: Adam
    state: TrainingState
    config: TrainConfig


class Trainer:
    """Runs one phase of training over an in-memory sprite dataset."""

    def __init__(
        self,
        network: DenseFaceNetwork,
        dataset: SpriteDataset,
        config: TrainConfig,
        *,
        resume: ResumePoint | None = None,
    ) -> None:
        self.network = network
        self.dataset = dataset
        self.config = config
        self.phase = TrainPhase(config.phase)
        self.sched = make_schedule(config.schedule, network.config.unet.timesteps)
        self.weights = AnnotationWeights(config.w_lmk, config.w_mask, config.w_depth)
        self.optimizer = Adam(network.prepare_phase(self.phase), lr=config.learning_rate)
        self.state = TrainingState(phase=self.phase)
        if resume is not None:
            if resume.state.phase is not self.phase:
                msg = f"cannot resume a {resume.state.phase.value} run in phase {self.phase.value}"
                raise ConfigError(msg)
            self.optimizer.load_state(resume.optimizer_tensors, resume.state.step)
            self.state = resume.state
        self.train_rows = dataset.indices("train")
        if self.train_rows.size == 0:
            msg = "dataset has no training samples"
            raise ConfigError(msg)
        heldout = dataset.indices("heldout")
        pool = heldout if heldout.size else self.train_rows
        self.heldout_rows = pool[: config.heldout_batch]

    # ---- objectives --------------------------------------------------------
    def _rng(self, step: int) -> np.random.Generator:
        return np.random.default_rng([self.config.seed, _PHASE_STREAM[self.phase], step])

    def sample_batch(self, rng: np.random.Generator) -> SpriteBatch:
        picks = rng.integers(0, self.train_rows.size, size=self.config.batch_size)
        return self.dataset.batch(self.train_rows[picks], dtype=self.network.dtype)

    def step_loss(self, batch: SpriteBatch, rng: np.random.Generator) -> StepLosses:
        if self.phase is TrainPhase.BASE:
            return self._base_loss(batch, rng)
        if self.phase is TrainPhase.ADAPTER:
            return self._adapter_loss(batch, rng)
        return self._identity_loss(batch)

    def _base_loss(self, batch: SpriteBatch, rng: np.random.Generator) -> StepLosses:
        net = self.network
        drop = rng.random(len(batch.captions)) < self.config.caption_dropout
        captions = ["" if d else c for d, c in zip(drop, batch.captions, strict=True)]
        mode = GenerationMode.TEXT_EDITING
        cond = net.condition(net.encode_captions(captions), mode)
        terms = diffusion_loss(
            batch.x0, lambda x, t: net.denoise(x, t, cond, mode), self.sched, rng
        )
        value = terms.loss.item()
        return StepLosses(total=terms.loss, diffusion=value, annotation=0.0)

    def _adapter_loss(self, batch: SpriteBatch, rng: np.random.Generator) -> StepLosses:
        net = self.network
        mode = GenerationMode.FACE_GENERATION
        c_id = net.embed_identity(batch.id_params)
        cond = net.condition(net.encode_captions(batch.captions), mode, c_id, batch.poses)
        terms = diffusion_loss(
            batch.x0,
            lambda x, t: net.denoise(x, t, cond, mode, batch.poses),
            self.sched,
            rng,
        )
        heads = net.dense_heads
        if heads is None:
            msg = "adapter phase needs the dense heads"
            raise ConfigError(msg)
        targets = encode_targets(batch.annotations, heads.heatmap_size, net.dtype)
        return adapter_loss(
            terms,
            heads,
            targets,
            total_steps=self.sched.T,
            fraction=self.config.annotation_t_fraction,
            weights=self.weights,
        )

    def _identity_loss(self, batch: SpriteBatch) -> StepLosses:
        net = self.network
        encoder = net.identity_encoder
        size = encoder.crop_size if encoder is not None else Constants.ID_CROP_SIZE
        crops: list[np.ndarray] = []
        keep: list[int] = []
        for i, (x0, ann) in enumerate(zip(batch.x0, batch.annotations, strict=True)):
            crop = crop_to_mask(x0, ann.hard_mask(), size)
            if crop is not None:
                crops.append(crop.astype(net.dtype))
                keep.append(i)
        if not crops:
            msg = "identity batch has no sample with a non-empty face mask"
            raise ConfigError(msg)
        pred = net.embed_crops(Tensor(np.stack(crops), dtype=net.dtype))
        target = net.embed_identity(batch.id_params[keep])
        loss = cosine_distance_loss(pred, target)
        return StepLosses(total=loss, diffusion=0.0, annotation=0.0)

    # ---- loop --------------------------------------------------------------
    def train_step(self, step: int) -> StepLosses:
        """One optimizer update; returns the loss terms before the update."""
        rng = self._rng(step)
        batch = self.sample_batch(rng)
        self.optimizer.zero_grad()
        losses = self.step_loss(batch, rng)
        backward(losses.total)
        self.optimizer.step()
        return losses

    def heldout_loss(self) -> float:
        """Objective on the fixed held-out batch, without gradient tracking."""
        rng = np.random.default_rng([self.config.seed, _HELDOUT_STREAM])
        batch = self.dataset.batch(self.heldout_rows, dtype=self.network.dtype)
        with no_grad():
            return self.step_loss(batch, rng).total.item()

    def run(self, *, progress: bool = False) -> TrainResult:
        cfg = self.config
        _logger.info(
            "Training phase %s: steps %d..%d, batch %d, lr %g, %d trainable tensors",
            self.phase.value,
            self.state.step,
            cfg.steps,
            cfg.batch_size,
            cfg.learning_rate,
            len(self.optimizer.params),
        )
        state = self.state.with_status(TrainingStatus.RUNNING)
        steps = tqdm(
            range(state.step, cfg.steps),
            desc=f"train {self.phase.value}",
            disable=not progress,
            leave=False,
        )
        for step in steps:
            losses = self.train_step(step)
            state = state.advance(losses.total.item())
            if state.step % cfg.log_interval == 0 or state.step == cfg.steps:
                window = state.loss_history[-cfg.log_interval :]
                _logger.info(
                    "step %d/%d loss=%.5f (diffusion=%.5f annotation=%.5f)",
                    state.step,
                    cfg.steps,
                    float(np.mean(window)),
                    losses.diffusion,
                    losses.annotation,
                )
            if state.step % cfg.eval_interval == 0:
                heldout = self.heldout_loss()
                state = state.with_heldout(heldout)
                _logger.info("step %d held-out loss=%.5f", state.step, heldout)
        self.state = state.with_status(TrainingStatus.COMPLETED)
        _logger.info("Finished phase %s at step %d", self.phase.value, self.state.step)
        return TrainResult(self.network, self.optimizer, self.state, cfg)


def _check_phase(config: TrainConfig, phase: TrainPhase) -> None:
    if TrainPhase(config.phase) is not phase:
        msg = f"config phase '{config.phase}' does not match {phase.value} training"
        raise ConfigError(msg)


def new_network(config: TrainConfig) -> DenseFaceNetwork:
    """Fresh base network whose vocabulary covers the caption grammar."""
    vocab = Vocabulary.from_words(caption_words())
    return DenseFaceNetwork(ModelConfig.from_train_config(config), vocab)


def train_phase_base(
    config: TrainConfig,
    dataset: SpriteDataset,
    *,
    network: DenseFaceNetwork | None = None,
    resume: ResumePoint | None = None,
    progress: bool = False,
) -> TrainResult:
    """Train the text encoder and UNet from scratch (or resume them).

    Raises:
        ConfigError: If ``config.phase`` is not ``base``
    """
    _check_phase(config, TrainPhase.BASE)
    net = network if network is not None else new_network(config)
    return Trainer(net, dataset, config, resume=resume).run(progress=progress)


def train_phase_adapter(
    config: TrainConfig,
    dataset: SpriteDataset,
    base: DenseFaceNetwork,
    *,
    resume: ResumePoint | None = None,
    progress: bool = False,
) -> TrainResult:
    """Attach and train the adapter group with every base parameter frozen.

    The pose branch is copied from ``base``'s encoder when the group is
    attached. Ablation switches come from ``config``.

    Raises:
        ConfigError: If ``config.phase`` is not ``adapter``
    """
    _check_phase(config, TrainPhase.ADAPTER)
    if base.has_adapter_group:
        switches = base.config.with_overrides(
            lambda_id=config.lambda_id,
            use_pose_token=config.use_pose_token,
            use_pose_branch=config.use_pose_branch,
        )
    else:
        switches = base.config.with_overrides(
            lambda_id=config.lambda_id,
            use_pose_token=config.use_pose_token,
            use_pose_branch=config.use_pose_branch,
            pose_branch_middle=config.pose_branch_middle,
            zero_init_injection=config.zero_init_injection,
        )
    base.reconfigure(switches)
    base.attach_adapter_group()
    return Trainer(base, dataset, config, resume=resume).run(progress=progress)


def train_phase_identity(
    config: TrainConfig,
    dataset: SpriteDataset,
    network: DenseFaceNetwork,
    *,
    resume: ResumePoint | None = None,
    progress: bool = False,
) -> TrainResult:
    """Train the evaluation image encoder to regress oracle embeddings.

    Raises:
        ConfigError: If ``config.phase`` is not ``identity``
    """
    _check_phase(config, TrainPhase.IDENTITY)
    network.attach_identity_encoder()
    return Trainer(network, dataset, config, resume=resume).run(progress=progress)
