"""Coarse-to-fine dense annotation heads.

The heads read only decoder features captured by the UNet:

- landmarks from the coarsest level: five heatmaps decoded by soft-argmax
- mask from the next finer level, also fed the upsampled heatmaps;
  its logits are upsampled to the full frame
- depth at full resolution, also fed the full-resolution mask logits
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from dense_face.annotations import AnnotationSet
from dense_face.constants import Constants, GenerationMode
from dense_face.exceptions import ContractError, DimensionError
from dense_face.tensor_core import Conv2d, Module, Tensor, ops
from dense_face.unet import InternalFeatures, UNetConfig


@dataclass(frozen=True)
class DenseHeadOutput:
    """Raw head outputs: heatmaps ``[B, 5, r, r]``, mask and depth logits ``[B, 1, S, S]``."""

    heatmaps: Tensor
    mask_logits: Tensor
    depth_logits: Tensor


class _ConvHead(Module):
    def __init__(
        self,
        in_channels: int,
        hidden: int,
        out_channels: int,
        *,
        rng: np.random.Generator,
        dtype: type[np.floating],
    ) -> None:
        super().__init__()
        self.conv1 = Conv2d(in_channels, hidden, 3, rng=rng, dtype=dtype)
        self.conv2 = Conv2d(hidden, out_channels, 1, rng=rng, dtype=dtype)

    def forward(self, x: Tensor) -> Tensor:
        return self.conv2.forward(ops.silu(self.conv1.forward(x)))


def _upsample(x: Tensor, factor: int) -> Tensor:
    while factor > 1:
        x = ops.nearest_upsample2(x)
        factor //= 2
    return x


class DenseHeads(Module):
    """Landmark, mask and depth decoders over ``InternalFeatures``."""

    def __init__(
        self,
        config: UNetConfig,
        *,
        hidden: int = 32,
        rng: np.random.Generator,
        dtype: type[np.floating] = np.float32,
    ) -> None:
        super().__init__()
        self.config = config
        self.landmark_level = config.levels - 1
        self.mask_level = min(1, config.levels - 1)
        lmk = Constants.LANDMARK_COUNT
        self.landmark = _ConvHead(
            config.channels(self.landmark_level), hidden, lmk, rng=rng, dtype=dtype
        )
        self.mask = _ConvHead(
            config.channels(self.mask_level) + lmk, hidden, 1, rng=rng, dtype=dtype
        )
        self.depth = _ConvHead(config.channels(0) + 1, hidden, 1, rng=rng, dtype=dtype)

    @property
    def heatmap_size(self) -> int:
        return self.config.resolution(self.landmark_level)

    def forward(self, feats: InternalFeatures) -> DenseHeadOutput:
        if len(feats.maps) != self.config.levels:
            msg = f"expected {self.config.levels} feature levels, got {len(feats.maps)}"
            raise DimensionError(msg)
        heatmaps = self.landmark.forward(feats.at_level(self.landmark_level))
        up = 2 ** (self.landmark_level - self.mask_level)
        mask_in = ops.concat([feats.at_level(self.mask_level), _upsample(heatmaps, up)], axis=1)
        mask_logits = _upsample(self.mask.forward(mask_in), 2**self.mask_level)
        depth_in = ops.concat([feats.at_level(0), mask_logits], axis=1)
        return DenseHeadOutput(
            heatmaps=heatmaps, mask_logits=mask_logits, depth_logits=self.depth.forward(depth_in)
        )


def soft_argmax(heatmaps: np.ndarray, image_size: int) -> np.ndarray:
    """Expected pixel coordinates ``[..., K, 2]`` (x, y) of ``[..., K, r, r]`` heatmaps.

    Negative responses are ignored; an all-nonpositive map is treated as
    uniform. Cell ``j`` has its centre at ``(j + 0.5) * image_size / r``.
    """
    r = heatmaps.shape[-1]
    scale = image_size / r
    weights = np.maximum(np.asarray(heatmaps, dtype=np.float64), 0.0)
    totals = weights.sum(axis=(-2, -1), keepdims=True)
    weights = np.where(totals > 0, weights, 1.0)
    weights = weights / weights.sum(axis=(-2, -1), keepdims=True)
    centres = (np.arange(r, dtype=np.float64) + 0.5) * scale
    x = (weights.sum(axis=-2) * centres).sum(axis=-1)
    y = (weights.sum(axis=-1) * centres).sum(axis=-1)
    return np.stack([x, y], axis=-1)


def _sigmoid(v: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * v))


def predict_annotations(feats: InternalFeatures, dh: DenseHeads) -> list[AnnotationSet]:
    """Decode one ``AnnotationSet`` per batch element.

    Raises:
        ContractError: If the features come from a text-editing forward pass
    """
    if feats.mode is not GenerationMode.FACE_GENERATION:
        msg = "dense annotations are only defined for face_generation features"
        raise ContractError(msg)
    out = dh.forward(feats)
    size = dh.config.image_size
    landmarks = np.clip(soft_argmax(out.heatmaps.data, size), 0.0, float(size))
    masks = _sigmoid(out.mask_logits.data.astype(np.float64))[:, 0]
    depths = _sigmoid(out.depth_logits.data.astype(np.float64))[:, 0]
    return [
        AnnotationSet(landmarks=landmarks[i], mask=masks[i], depth=depths[i])
        for i in range(landmarks.shape[0])
    ]
