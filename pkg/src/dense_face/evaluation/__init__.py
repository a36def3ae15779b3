"""Desk-scale evaluation metrics and reports.

Main Components:
- eval_identity / eval_pose / eval_background / eval_attributes: per-sample
  metrics against the renderer's oracles; identity also reports a
  permuted-identity baseline
- eval_annotations / eval_diversity: dense-annotation quality and
  same-identity variation
- evaluate_checkpoint: generation plus every metric for one checkpoint
- EvalReport: JSON-serializable report with a plain-text table
"""

from .metrics import (
    attribute_regions,
    classify_attributes,
    derangement,
    eval_annotations,
    eval_attributes,
    eval_background,
    eval_diversity,
    eval_identity,
    eval_pose,
    parse_caption,
)
from .models import (
    AnnotationMetric,
    AttributeMetric,
    BackgroundMetric,
    DiversityMetric,
    EvalReport,
    IdentityMetric,
    PoseMetric,
)
from .runner import EvalSettings, evaluate_checkpoint, pick_samples

__all__ = [
    "AnnotationMetric",
    "AttributeMetric",
    "BackgroundMetric",
    "DiversityMetric",
    "EvalReport",
    "EvalSettings",
    "IdentityMetric",
    "PoseMetric",
    "attribute_regions",
    "classify_attributes",
    "derangement",
    "eval_annotations",
    "eval_attributes",
    "eval_background",
    "eval_diversity",
    "eval_identity",
    "eval_pose",
    "evaluate_checkpoint",
    "parse_caption",
    "pick_samples",
]
