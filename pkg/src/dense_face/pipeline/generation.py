"""Text-editing, face-generation and personalized sampling.

Every noise draw of a request comes from its own generator seeded by
``(seed, stream)``:

- stream 0: initial noise of the text-editing trajectory
- stream 1: initial noise of the face-generation trajectory
- stream 2: the fixed noise used to re-noise the base outside the mask
- stream 3: noise of the predicted-mask probe
- streams 4 and 5: DDIM noise for ``eta > 0`` (text, face)

so a face-generation request and the face trajectory of the personalized
pipeline with the same seed start from identical noise.

Classifier-free guidance runs the conditional and the empty-caption pass
separately and combines them as ``eps_u + g * (eps_c - eps_u)``. At ``g = 0``
only the unconditional pass runs and at ``g = 1`` only the conditional one.
In face-generation mode the unconditional pass keeps identity and pose and
drops only the caption.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Final

from fastmcp.utilities.logging import get_logger
import numpy as np

from dense_face.conditioning import ConditionBundle, PoseCondition
from dense_face.constants import Constants, GenerationMode, MaskSource
from dense_face.exceptions import ConfigError
from dense_face.imaging import from_uint8, read_rgb, resize_rgb, to_uint8
from dense_face.network import DenseFaceNetwork
from dense_face.schedulers import (
    add_noise,
    ddim_step,
    make_schedule,
    plan_timesteps,
    predict_x0,
)
from dense_face.tensor_core import Tensor, no_grad
from dense_face.unet import InternalFeatures

from .blending import blend_background, dilate_mask, ellipse_mask, load_mask, threshold_mask
from .models import BlendMask, GenerationRequest, GenerationResult

_logger = get_logger(__name__)

_TEXT_NOISE: Final[int] = 0
_FACE_NOISE: Final[int] = 1
_BLEND_NOISE: Final[int] = 2
_PROBE_NOISE: Final[int] = 3
_TEXT_ETA: Final[int] = 4
_FACE_ETA: Final[int] = 5


def apply_guidance(eps_uncond: np.ndarray, eps_cond: np.ndarray, scale: float) -> np.ndarray:
    return eps_uncond + scale * (eps_cond - eps_uncond)


@dataclass(frozen=True)
class _Conditions:
    """Conditional and unconditional bundles; a bundle the guidance scale skips is None."""

    mode: GenerationMode
    cond: ConditionBundle | None
    uncond: ConditionBundle | None
    poses: list[PoseCondition] | None = None


@dataclass(frozen=True)
class _Blend:
    mask: np.ndarray
    base: np.ndarray
    eps: np.ndarray


class GenerationPipeline:
    """Sampling entry points over one loaded network.

    The network is only read, so one pipeline may serve concurrent requests.
    """

    def __init__(self, network: DenseFaceNetwork) -> None:
        self.network = network
        self.sched = make_schedule(network.config.schedule, network.config.unet.timesteps)
        self.size = network.config.unet.image_size

    # ---- helpers -----------------------------------------------------------
    def _noise(self, seed: int, stream: int) -> np.ndarray:
        rng = np.random.default_rng([seed, stream])
        shape = (1, Constants.IMAGE_CHANNELS, self.size, self.size)
        return rng.standard_normal(shape).astype(self.network.dtype)

    def resolve_identity(self, req: GenerationRequest) -> Tensor:
        """Identity embedding ``[1, d]`` from the request's identity source.

        Raises:
            ConfigError: If the source is missing, has the wrong length or is
                a zero embedding, or an image is given without an identity encoder
        """
        net = self.network
        if req.id_params is not None:
            params = np.asarray(req.id_params, dtype=np.float64)
            if params.shape != (Constants.ID_PARAM_COUNT,):
                msg = (
                    f"identity spec needs {Constants.ID_PARAM_COUNT} values, "
                    f"got {params.size}"
                )
                raise ConfigError(msg)
            return net.embed_identity(params[None, :])
        if req.id_embedding is not None:
            vec = np.asarray(req.id_embedding, dtype=np.float64)
            dim = net.config.conditioning.id_dim
            norm = float(np.linalg.norm(vec))
            if vec.shape != (dim,) or norm == 0.0:
                msg = f"identity embedding must be a nonzero vector of {dim} values"
                raise ConfigError(msg)
            return Tensor((vec / norm)[None, :], dtype=net.dtype)
        if req.id_image is not None:
            encoder = net.identity_encoder
            if encoder is None:
                msg = "an identity image needs a checkpoint with a trained identity encoder"
                raise ConfigError(msg)
            rgb = resize_rgb(read_rgb(Path(req.id_image)), encoder.crop_size)
            return net.embed_crops(Tensor(from_uint8(rgb, net.dtype)[None], dtype=net.dtype))
        msg = f"{req.mode} mode needs an identity source"
        raise ConfigError(msg)

    def _conditions(
        self, req: GenerationRequest, mode: GenerationMode, c_id: Tensor | None
    ) -> _Conditions:
        net = self.network
        poses = [req.pose_condition] if mode is GenerationMode.FACE_GENERATION else None

        def bundle(caption: str) -> ConditionBundle:
            text = net.encode_captions([caption])
            return net.condition(
                text,
                mode,
                c_id,
                poses,
                lambda_id=req.lambda_id,
                use_pose_token=req.use_pose_token,
            )

        g = req.guidance
        cond = bundle(req.caption) if g != 0.0 else None
        uncond = bundle("") if g != 1.0 else None
        return _Conditions(mode=mode, cond=cond, uncond=uncond, poses=poses)

    def _eps(
        self,
        x: np.ndarray,
        t: int,
        cond: ConditionBundle,
        conds: _Conditions,
        req: GenerationRequest,
    ) -> tuple[np.ndarray, InternalFeatures]:
        eps, feats = self.network.denoise(
            Tensor(x, dtype=self.network.dtype),
            t,
            cond,
            conds.mode,
            conds.poses,
            use_pose_branch=req.use_pose_branch,
        )
        return eps.data, feats

    def _guided_eps(
        self, x: np.ndarray, t: int, conds: _Conditions, req: GenerationRequest
    ) -> tuple[np.ndarray, InternalFeatures]:
        """Guided noise estimate and the features of the conditional pass.

        At ``g = 0`` the features come from the unconditional pass.
        """
        if conds.cond is None:
            return self._eps(x, t, _present(conds.uncond), conds, req)
        eps_c, feats = self._eps(x, t, conds.cond, conds, req)
        if conds.uncond is None:
            return eps_c, feats
        eps_u, _ = self._eps(x, t, conds.uncond, conds, req)
        return apply_guidance(eps_u, eps_c, req.guidance).astype(x.dtype), feats

    def _sample(
        self,
        x: np.ndarray,
        conds: _Conditions,
        req: GenerationRequest,
        eta_stream: int,
        blend: _Blend | None = None,
    ) -> tuple[np.ndarray, InternalFeatures]:
        plan = plan_timesteps(self.sched.T, req.steps, req.eta)
        rng = np.random.default_rng([req.seed, eta_stream])
        feats: InternalFeatures | None = None
        for t, t_prev in plan.transitions():
            eps, feats = self._guided_eps(x, t, conds, req)
            if t_prev is None:
                x = predict_x0(x, eps, t, self.sched)
                continue
            x = ddim_step(x, eps, t, t_prev, req.eta, self.sched, rng)
            if blend is not None:
                x = blend_background(x, blend.mask, blend.base, blend.eps, t_prev, self.sched)
        if blend is not None:
            x = np.where(blend.mask, x, blend.base).astype(x.dtype)
        if feats is None:
            msg = "sampling plan has no timesteps"
            raise ConfigError(msg)
        return x, feats

    # ---- entry points ------------------------------------------------------
    def generate_text(self, req: GenerationRequest) -> GenerationResult:
        """Text-editing generation; the adapter group is never used.

        Raises:
            TokenizationError: If the caption has out-of-vocabulary words
        """
        with no_grad():
            conds = self._conditions(req, GenerationMode.TEXT_EDITING, None)
            x0, _ = self._sample(self._noise(req.seed, _TEXT_NOISE), conds, req, _TEXT_ETA)
        return GenerationResult(image=to_uint8(x0[0]), state=x0)

    def generate_face(self, req: GenerationRequest) -> GenerationResult:
        """Face-generation with identity, pose, adapters and dense annotations.

        Raises:
            ConfigError: If the identity source is missing or the checkpoint
                has no adapter group
        """
        req.check()
        with no_grad():
            c_id = self.resolve_identity(req)
            conds = self._conditions(req, GenerationMode.FACE_GENERATION, c_id)
            x0, feats = self._sample(self._noise(req.seed, _FACE_NOISE), conds, req, _FACE_ETA)
            annotations = self.network.annotate(feats)[0]
        return GenerationResult(image=to_uint8(x0[0]), state=x0, annotations=annotations)

    def make_blend_mask(
        self,
        req: GenerationRequest,
        base_state: np.ndarray | None = None,
        c_id: Tensor | None = None,
    ) -> BlendMask:
        """Blend mask from the request's mask source.

        The predicted source runs one face-generation pass on the base noised
        to ``0.3 T`` and thresholds the dense-head mask; an empty prediction
        falls back to the ellipse.

        Raises:
            ConfigError: If the predicted source lacks a base state or identity,
                or the file source lacks a path
        """
        if req.mask is MaskSource.ELLIPSE:
            return ellipse_mask(self.size)
        if req.mask is MaskSource.FILE:
            if not req.mask_path:
                msg = "the file mask source needs a mask path"
                raise ConfigError(msg)
            return load_mask(Path(req.mask_path), self.size)
        if base_state is None or c_id is None:
            msg = "the predicted mask needs a base image and an identity embedding"
            raise ConfigError(msg)
        t = int(Constants.MASK_PROBE_FRACTION * self.sched.T)
        noise = self._noise(req.seed, _PROBE_NOISE)
        x_t = add_noise(base_state, noise, t, self.sched)
        net = self.network
        mode = GenerationMode.FACE_GENERATION
        poses = [req.pose_condition]
        with no_grad():
            cond = net.condition(
                net.encode_captions([req.caption]),
                mode,
                c_id,
                poses,
                lambda_id=req.lambda_id,
                use_pose_token=req.use_pose_token,
            )
            _, feats = net.denoise(
                Tensor(x_t, dtype=net.dtype),
                t,
                cond,
                mode,
                poses,
                use_pose_branch=req.use_pose_branch,
            )
            probs = net.annotate(feats)[0].mask
        hard = dilate_mask(threshold_mask(probs))
        if not hard.any():
            _logger.warning("Predicted face mask is empty; falling back to the centred ellipse")
            fallback = ellipse_mask(self.size)
            return BlendMask(values=fallback.values, source=MaskSource.ELLIPSE, fell_back=True)
        return BlendMask(values=hard, source=MaskSource.PREDICTED)

    def personalized_generate(self, req: GenerationRequest) -> GenerationResult:
        """Text-editing base, blend mask, then a masked face-generation pass.

        After every DDIM step the state outside the mask is replaced by the
        base re-noised to the new timestep with one fixed noise draw, and by
        the base itself at the last step, so background pixels of the final
        image equal the base byte for byte.
        """
        req.check()
        base = self.generate_text(req)
        with no_grad():
            c_id = self.resolve_identity(req)
            mask = self.make_blend_mask(req, base.state, c_id)
            _logger.info(
                "Blend mask from %s covers %.1f%% of the image",
                mask.source.value,
                100.0 * mask.coverage,
            )
            conds = self._conditions(req, GenerationMode.FACE_GENERATION, c_id)
            blend = _Blend(
                mask=mask.values,
                base=base.state,
                eps=self._noise(req.seed, _BLEND_NOISE),
            )
            x0, feats = self._sample(
                self._noise(req.seed, _FACE_NOISE), conds, req, _FACE_ETA, blend
            )
            annotations = self.network.annotate(feats)[0]
        return GenerationResult(
            image=to_uint8(x0[0]),
            state=x0,
            annotations=annotations,
            base=base.image,
            base_state=base.state,
            mask=mask,
        )

    def generate(self, req: GenerationRequest) -> GenerationResult:
        """Dispatch on ``req.mode``."""
        _logger.info(
            "Generating (%s) seed=%d steps=%d guidance=%g",
            req.mode,
            req.seed,
            req.steps,
            req.guidance,
        )
        if req.mode == "text":
            return self.generate_text(req)
        if req.mode == "face":
            return self.generate_face(req)
        return self.personalized_generate(req)


def _present(bundle: ConditionBundle | None) -> ConditionBundle:
    if bundle is None:
        msg = "guidance needs at least one condition bundle"
        raise ConfigError(msg)
    return bundle
