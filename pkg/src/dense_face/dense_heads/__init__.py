"""Dense annotation heads: landmarks, mask and depth from internal UNet features.

Main Components:
- DenseHeads: coarse-to-fine conv decoders
- predict_annotations / soft_argmax: decoding to ``AnnotationSet``
- annotation_loss / encode_targets / gaussian_heatmaps: supervision
"""

from .heads import DenseHeadOutput, DenseHeads, predict_annotations, soft_argmax
from .loss import (
    AnnotationLoss,
    AnnotationTargets,
    AnnotationWeights,
    annotation_loss,
    encode_targets,
    gaussian_heatmaps,
    select_rows,
)

__all__ = [
    "AnnotationLoss",
    "AnnotationTargets",
    "AnnotationWeights",
    "DenseHeadOutput",
    "DenseHeads",
    "annotation_loss",
    "encode_targets",
    "gaussian_heatmaps",
    "predict_annotations",
    "select_rows",
    "soft_argmax",
]
