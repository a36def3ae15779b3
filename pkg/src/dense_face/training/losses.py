"""Training objectives.

``diffusion_loss`` is the epsilon-prediction MSE. Random draws happen in a
fixed order from the caller's generator: first the timesteps (one uniform
integer in ``[0, T)`` per sample), then the noise. The adapter objective adds
the annotation loss on the samples whose timestep is at most
``annotation_t_fraction * T``; the identity objective is the mean cosine
distance between predicted and oracle embeddings.
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from dense_face.dense_heads import (
    AnnotationTargets,
    AnnotationWeights,
    DenseHeads,
    annotation_loss,
    select_rows,
)
from dense_face.schedulers import NoiseSchedule, add_noise
from dense_face.tensor_core import Tensor, ops
from dense_face.unet import InternalFeatures

Denoiser = Callable[[Tensor, np.ndarray], tuple[Tensor, InternalFeatures | None]]


@dataclass(frozen=True)
class DiffusionTerms:
    """The noise-prediction loss and the draws that produced it."""

    loss: Tensor
    t: np.ndarray
    eps: np.ndarray
    x_t: np.ndarray
    features: InternalFeatures | None


@dataclass(frozen=True)
class StepLosses:
    """Scalar loss terms of one step; ``annotation`` is 0 when not applicable."""

    total: Tensor
    diffusion: float
    annotation: float
    annotated: int = 0


def diffusion_loss(
    x0: np.ndarray, denoise: Denoiser, sched: NoiseSchedule, rng: np.random.Generator
) -> DiffusionTerms:
    """``MSE(eps_hat(x_t, t), eps)`` for ``t ~ U[0, T)`` and ``eps ~ N(0, 1)``."""
    batch = x0.shape[0]
    t = rng.integers(0, sched.T, size=batch, dtype=np.int64)
    eps = rng.standard_normal(x0.shape).astype(x0.dtype)
    x_t = add_noise(x0, eps, t, sched)
    eps_hat, feats = denoise(Tensor(x_t, dtype=x0.dtype), t)
    loss = ops.mse(eps_hat, Tensor(eps, dtype=eps_hat.dtype))
    return DiffusionTerms(loss=loss, t=t, eps=eps, x_t=x_t, features=feats)


def annotated_rows(t: np.ndarray, total: int, fraction: float) -> np.ndarray:
    """Indices of samples whose timestep is low enough for the annotation loss."""
    return np.flatnonzero(np.asarray(t) <= fraction * total)


def adapter_loss(
    terms: DiffusionTerms,
    heads: DenseHeads,
    targets: AnnotationTargets,
    *,
    total_steps: int,
    fraction: float,
    weights: AnnotationWeights | None = None,
) -> StepLosses:
    """Diffusion loss plus the annotation loss on the gated rows."""
    diffusion = terms.loss
    rows = annotated_rows(terms.t, total_steps, fraction)
    if rows.size == 0 or terms.features is None:
        return StepLosses(total=diffusion, diffusion=diffusion.item(), annotation=0.0)
    pred = select_rows(heads.forward(terms.features), rows)
    ann = annotation_loss(pred, targets.select(rows), weights)
    return StepLosses(
        total=ops.add(diffusion, ann.total),
        diffusion=diffusion.item(),
        annotation=ann.total.item(),
        annotated=int(rows.size),
    )


def cosine_distance_loss(pred: Tensor, target: Tensor) -> Tensor:
    """``mean(1 - <pred, target>)`` for unit-norm rows."""
    similarity = ops.sum(ops.mul(pred, target.detach()), axis=-1)
    return ops.sub(1.0, ops.mean(similarity))
