"""The composite dense-face network.

``DenseFaceNetwork`` owns every weight group under a stable prefix, which is
also its name in the checkpoint tensor table:

- base: ``text_encoder.*``, ``unet.*`` and the frozen ``oracle.*``
- adapter: ``adapters.<site>.*``, ``identity_mlp.*``, ``pose_projection.*``,
  ``pose_branch.*`` and ``dense_heads.*``
- identity: ``identity_encoder.*``

A freshly built network holds only the base group. The adapter group is
attached at the start of the adapter phase, when the pose branch is copied
from the (by then trained) base encoder. Text-editing passes never touch
the adapter group, so attaching it cannot change their output.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import asdict, dataclass, field, replace
from typing import TYPE_CHECKING, Any, Final

import numpy as np

from dense_face.annotations import AnnotationSet
from dense_face.attention import AdapterWeights
from dense_face.conditioning import (
    ConditionBundle,
    ConditioningConfig,
    IdentityImageEncoder,
    IdentityMLP,
    IdentityOracle,
    PoseCondition,
    PoseProjection,
    TextEmbedding,
    TextEncoder,
    Vocabulary,
    build_condition,
    identity_text_embedding,
    pose_images,
    tokenize_batch,
)
from dense_face.constants import GenerationMode, ScheduleKind, TrainPhase
from dense_face.dense_heads import DenseHeads, predict_annotations
from dense_face.exceptions import ConfigError, ContractError
from dense_face.tensor_core import Module, ModuleDict, Parameter, Tensor
from dense_face.unet import InternalFeatures, PoseBranch, UNet, UNetConfig, pose_branch_forward

if TYPE_CHECKING:
    from dense_face.models import TrainConfig

BASE_GROUP: Final[str] = "base"
ADAPTER_GROUP: Final[str] = "adapter"
IDENTITY_GROUP: Final[str] = "identity"

_GROUP_PREFIXES: Final[dict[str, tuple[str, ...]]] = {
    BASE_GROUP: ("text_encoder.", "unet.", "oracle."),
    ADAPTER_GROUP: (
        "adapters.",
        "identity_mlp.",
        "pose_projection.",
        "pose_branch.",
        "dense_heads.",
    ),
    IDENTITY_GROUP: ("identity_encoder.",),
}
_DTYPES: Final[dict[str, type[np.floating]]] = {"float32": np.float32, "float64": np.float64}


@dataclass(frozen=True)
class ModelConfig:
    """Everything needed to rebuild the network's architecture.

    Attributes:
        unet: Denoiser sizes and pose-branch switches
        conditioning: Text, identity and pose conditioning sizes
        use_pose_branch: Inject pose-branch features in face-generation mode
        schedule: Noise schedule family the denoiser was trained with
        seed: Initialization seed
        dtype: ``float32`` or ``float64``
    """

    unet: UNetConfig = field(default_factory=UNetConfig)
    conditioning: ConditioningConfig = field(default_factory=ConditioningConfig)
    use_pose_branch: bool = True
    schedule: str = "cosine"
    seed: int = 0
    dtype: str = "float32"

    def __post_init__(self) -> None:
        if self.unet.context_dim != self.conditioning.text_dim:
            msg = (
                f"UNet context_dim {self.unet.context_dim} must equal "
                f"text_dim {self.conditioning.text_dim}"
            )
            raise ConfigError(msg)
        if self.dtype not in _DTYPES:
            msg = f"dtype must be one of {sorted(_DTYPES)}, got {self.dtype!r}"
            raise ConfigError(msg)
        if self.schedule not in {k.value for k in ScheduleKind}:
            msg = f"unknown schedule kind {self.schedule!r}"
            raise ConfigError(msg)

    @property
    def numpy_dtype(self) -> type[np.floating]:
        return _DTYPES[self.dtype]

    def to_dict(self) -> dict[str, Any]:
        data = asdict(self)
        data["unet"]["channel_mults"] = list(self.unet.channel_mults)
        return data

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> ModelConfig:
        """Inverse of ``to_dict``.

        Raises:
            ConfigError: If a key is missing or unknown
        """
        try:
            unet = dict(data["unet"])
            unet["channel_mults"] = tuple(unet["channel_mults"])
            return cls(
                unet=UNetConfig(**unet),
                conditioning=ConditioningConfig(**data["conditioning"]),
                use_pose_branch=bool(data["use_pose_branch"]),
                schedule=str(data["schedule"]),
                seed=int(data["seed"]),
                dtype=str(data["dtype"]),
            )
        except (KeyError, TypeError) as exc:
            msg = f"invalid model configuration: {exc}"
            raise ConfigError(msg) from exc

    @classmethod
    def from_train_config(cls, cfg: TrainConfig) -> ModelConfig:
        unet = UNetConfig(
            image_size=cfg.image_size,
            base_channels=cfg.base_channels,
            channel_mults=tuple(cfg.channel_mults),
            blocks_per_level=cfg.blocks_per_level,
            heads=cfg.heads,
            head_dim=cfg.head_dim,
            time_dim=cfg.time_dim,
            groups=cfg.groups,
            context_dim=cfg.text_dim,
            timesteps=cfg.timesteps,
            pose_branch_middle=cfg.pose_branch_middle,
            zero_init_injection=cfg.zero_init_injection,
        )
        conditioning = ConditioningConfig(
            text_dim=cfg.text_dim,
            id_dim=cfg.id_dim,
            max_tokens=cfg.max_tokens,
            text_layers=cfg.text_layers,
            heads=cfg.heads,
            head_dim=cfg.head_dim,
            lambda_id=cfg.lambda_id,
            use_pose_token=cfg.use_pose_token,
        )
        return cls(
            unet=unet,
            conditioning=conditioning,
            use_pose_branch=cfg.use_pose_branch,
            schedule=cfg.schedule,
            seed=cfg.seed,
            dtype=cfg.dtype,
        )

    def with_overrides(
        self,
        *,
        lambda_id: float | None = None,
        use_pose_token: bool | None = None,
        use_pose_branch: bool | None = None,
        pose_branch_middle: bool | None = None,
        zero_init_injection: bool | None = None,
    ) -> ModelConfig:
        """Copy with ablation switches replaced; ``None`` keeps the current value."""
        cond = self.conditioning
        unet = self.unet
        return replace(
            self,
            unet=replace(
                unet,
                pose_branch_middle=_pick(pose_branch_middle, unet.pose_branch_middle),
                zero_init_injection=_pick(zero_init_injection, unet.zero_init_injection),
            ),
            conditioning=replace(
                cond,
                lambda_id=_pick(lambda_id, cond.lambda_id),
                use_pose_token=_pick(use_pose_token, cond.use_pose_token),
            ),
            use_pose_branch=_pick(use_pose_branch, self.use_pose_branch),
        )

    def same_architecture(self, other: ModelConfig) -> bool:
        """True when only ablation switches differ."""
        switches = other.with_overrides(
            lambda_id=self.conditioning.lambda_id,
            use_pose_token=self.conditioning.use_pose_token,
            use_pose_branch=self.use_pose_branch,
            pose_branch_middle=self.unet.pose_branch_middle,
            zero_init_injection=self.unet.zero_init_injection,
        )
        return switches == self


def _pick[T](value: T | None, current: T) -> T:
    return current if value is None else value


def _require[M: Module](module: M | None) -> M:
    if module is None:
        msg = "face_generation needs the adapter group (train the adapter phase first)"
        raise ConfigError(msg)
    return module


def group_of(name: str) -> str:
    """Weight group of a dotted parameter name."""
    for group, prefixes in _GROUP_PREFIXES.items():
        if name.startswith(prefixes):
            return group
    msg = f"tensor '{name}' belongs to no weight group"
    raise ContractError(msg)


class DenseFaceNetwork(Module):
    """Text encoder, UNet, identity paths, pose paths and dense heads."""

    def __init__(self, config: ModelConfig, vocab: Vocabulary) -> None:
        super().__init__()
        self.config = config
        self.vocab = vocab
        cond = config.conditioning
        dtype = config.numpy_dtype
        rng = np.random.default_rng([config.seed, 1])
        self.text_encoder = TextEncoder(
            len(vocab),
            dim=cond.text_dim,
            length=cond.max_tokens,
            layers=cond.text_layers,
            heads=cond.heads,
            head_dim=cond.head_dim,
            rng=rng,
            dtype=dtype,
        )
        self.unet = UNet(config.unet, rng=rng, dtype=dtype)
        self.oracle = IdentityOracle(id_dim=cond.id_dim, dtype=dtype)
        self.adapters: ModuleDict | None = None
        self.identity_mlp: IdentityMLP | None = None
        self.pose_projection: PoseProjection | None = None
        self.pose_branch: PoseBranch | None = None
        self.dense_heads: DenseHeads | None = None
        self.identity_encoder: IdentityImageEncoder | None = None

    # ---- construction ------------------------------------------------------
    @property
    def dtype(self) -> type[np.floating]:
        return self.config.numpy_dtype

    @property
    def has_adapter_group(self) -> bool:
        return self.adapters is not None

    @property
    def has_identity_encoder(self) -> bool:
        return self.identity_encoder is not None

    def attach_adapter_group(self) -> None:
        """Create the adapter group; the pose branch copies the current encoder."""
        if self.has_adapter_group:
            return
        cond = self.config.conditioning
        dtype = self.dtype
        rng = np.random.default_rng([self.config.seed, 2])
        self.adapters = ModuleDict(
            {site: AdapterWeights(w) for site, w in self.unet.site_weights().items()}
        )
        self.identity_mlp = IdentityMLP(
            id_dim=cond.id_dim, text_dim=cond.text_dim, rng=rng, dtype=dtype
        )
        self.pose_projection = PoseProjection(text_dim=cond.text_dim, rng=rng, dtype=dtype)
        self.pose_branch = PoseBranch(self.unet)
        self.dense_heads = DenseHeads(self.config.unet, rng=rng, dtype=dtype)

    def attach_identity_encoder(self) -> None:
        if self.has_identity_encoder:
            return
        rng = np.random.default_rng([self.config.seed, 3])
        self.identity_encoder = IdentityImageEncoder(
            id_dim=self.config.conditioning.id_dim, rng=rng, dtype=self.dtype
        )

    def reconfigure(self, config: ModelConfig) -> None:
        """Replace ablation switches (lambda, pose token, pose-branch options).

        Raises:
            ConfigError: If the sizes differ, or the pose-branch layout changes
                after the branch has been built
        """
        if not self.config.same_architecture(config):
            msg = "reconfigure may only change ablation switches, not architecture sizes"
            raise ConfigError(msg)
        layout_changed = (
            config.unet.pose_branch_middle != self.config.unet.pose_branch_middle
            or config.unet.zero_init_injection != self.config.unet.zero_init_injection
        )
        if layout_changed and self.has_adapter_group:
            msg = "pose-branch options are fixed once the adapter group exists"
            raise ConfigError(msg)
        self.config = config
        self.unet.config = config.unet

    def groups(self) -> list[str]:
        present = [BASE_GROUP]
        if self.has_adapter_group:
            present.append(ADAPTER_GROUP)
        if self.has_identity_encoder:
            present.append(IDENTITY_GROUP)
        return present

    def group_parameters(self, group: str) -> list[tuple[str, Parameter]]:
        return [(n, p) for n, p in self.named_parameters() if group_of(n) == group]

    def prepare_phase(self, phase: TrainPhase) -> list[tuple[str, Parameter]]:
        """Freeze everything except the groups ``phase`` trains; return those parameters.

        Raises:
            ConfigError: If the phase needs a group that is not attached
        """
        self.freeze()
        if phase is TrainPhase.BASE:
            self.text_encoder.unfreeze()
            self.unet.unfreeze()
        elif phase is TrainPhase.ADAPTER:
            for module in self._adapter_modules():
                module.unfreeze()
        else:
            if self.identity_encoder is None:
                msg = "identity phase needs an attached identity encoder"
                raise ConfigError(msg)
            self.identity_encoder.unfreeze()
        return [(n, p) for n, p in self.named_parameters() if p.requires_grad]

    def _adapter_modules(self) -> tuple[Module, ...]:
        modules = (
            self.adapters,
            self.identity_mlp,
            self.pose_projection,
            self.pose_branch,
            self.dense_heads,
        )
        present = tuple(m for m in modules if m is not None)
        if len(present) != len(modules):
            msg = "face_generation needs the adapter group (train the adapter phase first)"
            raise ConfigError(msg)
        return present

    def adapter_map(self) -> dict[str, AdapterWeights]:
        if self.adapters is None:
            return {}
        return {
            site: module
            for site, module in self.adapters.items()
            if isinstance(module, AdapterWeights)
        }

    # ---- forward paths -----------------------------------------------------
    def encode_captions(self, captions: Sequence[str]) -> TextEmbedding:
        ids = tokenize_batch(captions, self.vocab, self.config.conditioning.max_tokens)
        return self.text_encoder.forward(ids)

    def embed_identity(self, id_params: np.ndarray) -> Tensor:
        """Oracle embedding ``[B, d]`` of sprite identity parameters."""
        return self.oracle.forward(id_params)

    def condition(
        self,
        text: TextEmbedding,
        mode: GenerationMode,
        c_id: Tensor | None = None,
        poses: Sequence[PoseCondition] | None = None,
        *,
        lambda_id: float | None = None,
        use_pose_token: bool | None = None,
    ) -> ConditionBundle:
        """Assemble the condition bundle for ``mode``.

        ``lambda_id`` and ``use_pose_token`` override the configured switches
        for this call only.

        Raises:
            ConfigError: If face-generation mode lacks ``c_id`` or the adapter group
        """
        if mode is GenerationMode.TEXT_EDITING:
            return build_condition(text, mode)
        if c_id is None:
            msg = "face_generation mode requires an identity embedding"
            raise ConfigError(msg)
        self._adapter_modules()
        cond = self.config.conditioning
        idtext = identity_text_embedding(
            c_id,
            _pick(lambda_id, cond.lambda_id),
            _require(self.identity_mlp),
            self.text_encoder.face_embedding(self.vocab),
        )
        pose_tok = None
        if _pick(use_pose_token, cond.use_pose_token) and poses is not None:
            pose_tok = _require(self.pose_projection).forward(poses)
        return build_condition(text, mode, idtext, pose_tok)

    def denoise(
        self,
        x_t: Tensor,
        t: int | np.ndarray,
        cond: ConditionBundle,
        mode: GenerationMode,
        poses: Sequence[PoseCondition] | None = None,
        *,
        use_pose_branch: bool | None = None,
    ) -> tuple[Tensor, InternalFeatures]:
        """Predict noise; face-generation mode adds adapters and pose-branch features."""
        if mode is GenerationMode.TEXT_EDITING:
            return self.unet.forward(x_t, t, cond, mode)
        branch = _require(self.pose_branch)
        self._adapter_modules()
        pose_feats = None
        if _pick(use_pose_branch, self.config.use_pose_branch) and poses is not None:
            image = pose_images(poses, self.config.unet.image_size, self.dtype)
            pose_feats = pose_branch_forward(image, t, cond, branch, self.unet)
        return self.unet.forward(x_t, t, cond, mode, pose_feats, self.adapter_map())

    def annotate(self, feats: InternalFeatures) -> list[AnnotationSet]:
        return predict_annotations(feats, _require(self.dense_heads))

    def embed_crops(self, crops: Tensor) -> Tensor:
        """Identity embedding ``[B, d]`` of face crops via the trained image encoder.

        Raises:
            ConfigError: If no identity encoder is attached
        """
        if self.identity_encoder is None:
            msg = "no identity encoder in this checkpoint (train the identity phase first)"
            raise ConfigError(msg)
        return self.identity_encoder.forward(crops)

    # ---- persistence -------------------------------------------------------
    def metadata(self) -> dict[str, Any]:
        return {
            "model": self.config.to_dict(),
            "vocabulary": list(self.vocab.tokens),
            "groups": self.groups(),
        }

    @classmethod
    def from_tensors(
        cls,
        config: ModelConfig,
        vocab: Vocabulary,
        groups: Sequence[str],
        tensors: Mapping[str, np.ndarray],
    ) -> DenseFaceNetwork:
        """Rebuild a network with the given groups and load its weights strictly."""
        net = cls(config, vocab)
        if ADAPTER_GROUP in groups:
            net.attach_adapter_group()
        if IDENTITY_GROUP in groups:
            net.attach_identity_encoder()
        net.load_state_dict(tensors)
        net.freeze()
        return net
