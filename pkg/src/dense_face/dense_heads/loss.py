"""Annotation targets and the weighted annotation loss."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from dense_face.annotations import AnnotationSet
from dense_face.constants import Constants
from dense_face.exceptions import DimensionError
from dense_face.tensor_core import Tensor, ops

from .heads import DenseHeadOutput


@dataclass(frozen=True)
class AnnotationWeights:
    lmk: float = Constants.W_LMK
    mask: float = Constants.W_MASK
    depth: float = Constants.W_DEPTH


@dataclass(frozen=True)
class AnnotationTargets:
    """Ground truth encoded like the head outputs (heatmaps ``[B,5,r,r]``, maps ``[B,1,S,S]``)."""

    heatmaps: np.ndarray
    mask: np.ndarray
    depth: np.ndarray

    def select(self, rows: np.ndarray) -> AnnotationTargets:
        return AnnotationTargets(self.heatmaps[rows], self.mask[rows], self.depth[rows])


@dataclass(frozen=True)
class AnnotationLoss:
    total: Tensor
    landmarks: Tensor
    mask: Tensor
    depth: Tensor


def gaussian_heatmaps(
    landmarks: np.ndarray,
    size: int,
    image_size: int,
    sigma: float = Constants.HEATMAP_SIGMA,
) -> np.ndarray:
    """Unit-peak Gaussians ``[K, size, size]`` centred on pixel landmarks ``[K, 2]``.

    ``sigma`` is measured in heatmap cells.
    """
    scale = image_size / size
    grid = np.arange(size, dtype=np.float64)
    u = landmarks[:, 0] / scale - 0.5
    v = landmarks[:, 1] / scale - 0.5
    dx = (grid[None, None, :] - u[:, None, None]) ** 2
    dy = (grid[None, :, None] - v[:, None, None]) ** 2
    return np.exp(-(dx + dy) / (2.0 * sigma * sigma))


def encode_targets(
    gts: Sequence[AnnotationSet], heatmap_size: int, dtype: type[np.floating] = np.float32
) -> AnnotationTargets:
    size = gts[0].size
    heatmaps = np.stack([gaussian_heatmaps(g.landmarks, heatmap_size, size) for g in gts])
    mask = np.stack([g.mask for g in gts])[:, None]
    depth = np.stack([g.depth for g in gts])[:, None]
    return AnnotationTargets(heatmaps.astype(dtype), mask.astype(dtype), depth.astype(dtype))


def annotation_loss(
    pred: DenseHeadOutput,
    gt: AnnotationTargets,
    weights: AnnotationWeights | None = None,
) -> AnnotationLoss:
    """``w_lmk * MSE(heatmaps) + w_mask * BCE(mask) + w_depth * L1(depth)``.

    Mask probabilities are clamped to ``[1e-7, 1 - 1e-7]`` before the BCE.

    Raises:
        DimensionError: If predictions and targets disagree in shape
    """
    w = weights or AnnotationWeights()
    pairs = (
        (pred.heatmaps.shape, gt.heatmaps.shape),
        (pred.mask_logits.shape, gt.mask.shape),
        (pred.depth_logits.shape, gt.depth.shape),
    )
    for have, want in pairs:
        if have != want:
            msg = f"annotation prediction {have} does not match target {want}"
            raise DimensionError(msg)
    dtype = pred.heatmaps.dtype
    lmk = ops.mse(pred.heatmaps, Tensor(gt.heatmaps, dtype=dtype))
    eps = Constants.PROB_CLAMP
    prob = ops.clip(ops.sigmoid(pred.mask_logits), eps, 1.0 - eps)
    mask = ops.bce(prob, Tensor(gt.mask, dtype=dtype))
    depth = ops.l1(ops.sigmoid(pred.depth_logits), Tensor(gt.depth, dtype=dtype))
    total = ops.add(
        ops.add(ops.scale(lmk, w.lmk), ops.scale(mask, w.mask)), ops.scale(depth, w.depth)
    )
    return AnnotationLoss(total=total, landmarks=lmk, mask=mask, depth=depth)


def select_rows(pred: DenseHeadOutput, rows: np.ndarray) -> DenseHeadOutput:
    """Restrict raw head outputs to the given batch rows."""
    return DenseHeadOutput(
        heatmaps=ops.take(pred.heatmaps, rows, axis=0),
        mask_logits=ops.take(pred.mask_logits, rows, axis=0),
        depth_logits=ops.take(pred.depth_logits, rows, axis=0),
    )
