"""Pydantic models for evaluation results.

Every metric block carries the number of samples it averaged over and the
number it skipped. Averages over zero samples are ``None`` so that reports
round-trip through JSON unchanged.
"""

from __future__ import annotations

from pydantic import BaseModel, Field


class IdentityMetric(BaseModel):
    """Cosine between embedded face crops and the reference oracle embeddings."""

    mean: float | None = Field(default=None, description="Mean cosine similarity")
    std: float | None = Field(default=None, description="Population standard deviation")
    count: int = Field(default=0, ge=0, description="Samples with a non-empty face mask")
    skipped: int = Field(default=0, ge=0, description="Samples with an empty face mask")
    permuted_mean: float | None = Field(
        default=None, description="Mean cosine against a derangement of the reference identities"
    )
    permuted_count: int = Field(
        default=0, ge=0, description="Mismatched pairs in the permuted baseline"
    )


class PoseMetric(BaseModel):
    """Mean absolute error in degrees of the pose recovered from landmarks."""

    yaw: float | None = Field(default=None, description="Mean yaw error")
    pitch: float | None = Field(default=None, description="Mean pitch error")
    roll: float | None = Field(default=None, description="Mean roll error")
    count: int = Field(default=0, ge=0, description="Samples with recoverable landmarks")
    skipped: int = Field(default=0, ge=0, description="Samples with degenerate landmarks")


class BackgroundMetric(BaseModel):
    """Share of background pixels (mask == 0) byte-equal between final and base."""

    rate: float = Field(default=1.0, ge=0.0, le=1.0, description="Byte-equality rate")
    pixels: int = Field(default=0, ge=0, description="Background pixels compared")
    count: int = Field(default=0, ge=0, description="Image pairs compared")
    empty: bool = Field(
        default=True, description="True when no background pixel was compared"
    )


class AttributeMetric(BaseModel):
    """Caption-attribute accuracy from nearest-palette colour classification."""

    hair: float | None = Field(default=None, description="Hair colour accuracy")
    eye: float | None = Field(default=None, description="Eye colour accuracy")
    background: float | None = Field(default=None, description="Background colour accuracy")
    count: int = Field(default=0, ge=0, description="Samples classified")
    skipped: int = Field(default=0, ge=0, description="Samples with unparsable captions")


class AnnotationMetric(BaseModel):
    """Predicted versus reference annotations."""

    mask_iou: float | None = Field(default=None, description="Mean hard-mask IoU")
    depth_mae: float | None = Field(
        default=None, description="Mean depth absolute error inside the union of masks"
    )
    landmark_px: float | None = Field(
        default=None, description="Mean Euclidean landmark error in pixels"
    )
    count: int = Field(default=0, ge=0, description="Sample pairs compared")


class DiversityMetric(BaseModel):
    """Mean pairwise pixel distance between same-identity generations."""

    mean: float | None = Field(
        default=None, description="Mean absolute pixel difference in [0, 1]"
    )
    pairs: int = Field(default=0, ge=0, description="Image pairs compared")
    groups: int = Field(default=0, ge=0, description="Identities with at least two images")


class EvalReport(BaseModel):
    """All desk-scale metrics for one checkpoint."""

    checkpoint_hash: str = Field(default="", description="Content hash of the checkpoint")
    sample_count: int = Field(default=0, ge=0, description="Generated samples evaluated")
    seed: int = Field(default=0, description="Base seed of the generation requests")
    steps: int = Field(default=0, ge=0, description="DDIM steps per generation")
    identity: IdentityMetric = Field(default_factory=IdentityMetric)
    pose: PoseMetric = Field(default_factory=PoseMetric)
    background: BackgroundMetric = Field(default_factory=BackgroundMetric)
    attributes: AttributeMetric = Field(default_factory=AttributeMetric)
    annotations: AnnotationMetric = Field(default_factory=AnnotationMetric)
    diversity: DiversityMetric = Field(default_factory=DiversityMetric)

    def rows(self) -> list[tuple[str, str, int]]:
        """``(metric, value, n)`` rows of the plain-text table."""
        ident, pose, bg = self.identity, self.pose, self.background
        attr, ann, div = self.attributes, self.annotations, self.diversity
        return [
            ("identity cosine mean", _fmt(ident.mean), ident.count),
            ("identity cosine std", _fmt(ident.std), ident.count),
            ("identity cosine, permuted", _fmt(ident.permuted_mean), ident.permuted_count),
            ("pose yaw error (deg)", _fmt(pose.yaw), pose.count),
            ("pose pitch error (deg)", _fmt(pose.pitch), pose.count),
            ("pose roll error (deg)", _fmt(pose.roll), pose.count),
            ("background byte equality", _fmt(bg.rate), bg.pixels),
            ("hair colour accuracy", _fmt(attr.hair), attr.count),
            ("eye colour accuracy", _fmt(attr.eye), attr.count),
            ("background colour accuracy", _fmt(attr.background), attr.count),
            ("mask IoU", _fmt(ann.mask_iou), ann.count),
            ("depth MAE", _fmt(ann.depth_mae), ann.count),
            ("landmark error (px)", _fmt(ann.landmark_px), ann.count),
            ("face diversity", _fmt(div.mean), div.pairs),
        ]

    def to_table(self) -> str:
        """Aligned plain-text rendering."""
        rows = [("metric", "value", "n"), *((m, v, str(n)) for m, v, n in self.rows())]
        width = max(len(r[0]) for r in rows)
        vwidth = max(len(r[1]) for r in rows)
        lines = [f"{m:<{width}}  {v:>{vwidth}}  {n:>6}" for m, v, n in rows]
        lines.insert(1, "-" * len(lines[0]))
        header = f"checkpoint {self.checkpoint_hash[:16] or '-'}  samples {self.sample_count}"
        return "\n".join([header, *lines])


def _fmt(value: float | None) -> str:
    return "n/a" if value is None else f"{value:.4f}"
