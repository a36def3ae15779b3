"""Desk-scale metrics over generated images and annotations.

Images are 8-bit ``[H, W, 3]`` arrays, as written to disk. Attribute colours
are read from regions the renderer guarantees to be uniform:

- hair: the two rows above the topmost face-mask row, under that row's face pixels
- eyes: pixels within one pixel of each eye landmark
- background: mask complement within the bottom eighth of the frame, which
  no hair reaches for any pose in range
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence
import itertools
import re
from typing import TYPE_CHECKING, Final

from fastmcp.utilities.logging import get_logger
import numpy as np

from dense_face.annotations import AnnotationSet
from dense_face.conditioning import PoseCondition
from dense_face.constants import Constants
from dense_face.exceptions import ConfigError, DimensionError, PoseRecoveryError
from dense_face.imaging import crop_to_mask, from_uint8
from dense_face.synthfaces import (
    BACKGROUND_COLORS,
    EYE_COLORS,
    HAIR_COLORS,
    nearest_color,
    recover_pose,
)
from dense_face.tensor_core import Tensor, no_grad

from .models import (
    AnnotationMetric,
    AttributeMetric,
    BackgroundMetric,
    DiversityMetric,
    IdentityMetric,
    PoseMetric,
)

if TYPE_CHECKING:
    from dense_face.network import DenseFaceNetwork

_logger = get_logger(__name__)

_CAPTION_PATTERN: Final[re.Pattern[str]] = re.compile(
    r"a face with (\w+) hair and (\w+) eyes looking (\w+) on a (\w+) background"
)
_HAIR_BAND_ROWS: Final[int] = 2
_EYE_RADIUS: Final[float] = 1.0
_BACKGROUND_BAND: Final[float] = 0.125
_PERMUTATION_STREAM: Final[int] = 31


def _check_image(image: np.ndarray) -> None:
    if image.dtype != np.uint8 or image.ndim != 3 or image.shape[2] != 3:
        msg = f"expected uint8 [H, W, 3] image, got {image.dtype} {image.shape}"
        raise DimensionError(msg)


def _mean_or_none(values: Sequence[float]) -> float | None:
    return float(np.mean(values)) if values else None


def derangement(count: int, rng: np.random.Generator) -> np.ndarray:
    """Random permutation of ``range(count)`` with no fixed point (``count >= 2``).

    A shuffled order closed into a single cycle: ``perm[order[i]] = order[i + 1]``.

    Raises:
        DimensionError: If ``count`` is below two
    """
    if count < 2:
        msg = f"a derangement needs at least two items, got {count}"
        raise DimensionError(msg)
    order = rng.permutation(count)
    perm = np.empty(count, dtype=np.int64)
    perm[order] = np.roll(order, -1)
    return perm


def _permuted_cosines(
    pred: np.ndarray, ref: np.ndarray, params: np.ndarray, seed: int
) -> np.ndarray:
    if pred.shape[0] < 2:
        return np.zeros(0)
    perm = derangement(pred.shape[0], np.random.default_rng([seed, _PERMUTATION_STREAM]))
    # rows of one identity paired with each other are not mismatches
    distinct = np.any(params[perm] != params, axis=1)
    return (pred * ref[perm]).sum(axis=1)[distinct]


def eval_identity(
    images: Sequence[np.ndarray],
    masks: Sequence[np.ndarray],
    id_params: np.ndarray,
    network: DenseFaceNetwork,
    *,
    seed: int = 0,
) -> IdentityMetric:
    """Cosine between the embedded mask-box crop and the oracle embedding.

    The same crops are also scored against a seeded derangement of the
    reference identities. That permuted mean is the chance level the matched
    mean has to clear; pairs that land on an equal identity are left out of it.

    Raises:
        ConfigError: If the network has no identity encoder
        DimensionError: If the inputs differ in length
    """
    encoder = network.identity_encoder
    if encoder is None:
        msg = "identity evaluation needs a trained identity encoder"
        raise ConfigError(msg)
    params = np.atleast_2d(np.asarray(id_params, dtype=np.float64))
    if not len(images) == len(masks) == params.shape[0]:
        msg = f"got {len(images)} images, {len(masks)} masks and {params.shape[0]} identities"
        raise DimensionError(msg)
    crops: list[np.ndarray] = []
    rows: list[int] = []
    for i, (image, mask) in enumerate(zip(images, masks, strict=True)):
        _check_image(image)
        crop = crop_to_mask(from_uint8(image), np.asarray(mask, dtype=bool), encoder.crop_size)
        if crop is None:
            continue
        crops.append(crop.astype(network.dtype))
        rows.append(i)
    skipped = len(images) - len(rows)
    if skipped:
        _logger.warning("Identity metric skipped %d samples with an empty face mask", skipped)
    if not crops:
        return IdentityMetric(skipped=skipped)
    with no_grad():
        pred = network.embed_crops(Tensor(np.stack(crops), dtype=network.dtype)).data
        ref = network.embed_identity(params[rows]).data
    pred64, ref64 = pred.astype(np.float64), ref.astype(np.float64)
    cosine = np.clip((pred64 * ref64).sum(axis=1), -1.0, 1.0)
    permuted = np.clip(_permuted_cosines(pred64, ref64, params[rows], seed), -1.0, 1.0)
    return IdentityMetric(
        mean=float(cosine.mean()),
        std=float(cosine.std()),
        count=len(rows),
        skipped=skipped,
        permuted_mean=float(permuted.mean()) if permuted.size else None,
        permuted_count=int(permuted.size),
    )


def eval_pose(
    landmarks: Sequence[np.ndarray],
    requested: Sequence[PoseCondition],
    size: int = Constants.IMAGE_SIZE,
) -> PoseMetric:
    """Per-axis mean ``|recover_pose(landmarks) - requested|`` in degrees.

    Raises:
        DimensionError: If the inputs differ in length
    """
    if len(landmarks) != len(requested):
        msg = f"got {len(landmarks)} landmark sets for {len(requested)} poses"
        raise DimensionError(msg)
    errors: list[np.ndarray] = []
    for lmk, pose in zip(landmarks, requested, strict=True):
        try:
            got = recover_pose(lmk, size)
        except PoseRecoveryError as exc:
            _logger.warning("Pose metric skipped a sample: %s", exc)
            continue
        errors.append(np.abs(got.as_array() - pose.as_array()))
    skipped = len(landmarks) - len(errors)
    if not errors:
        return PoseMetric(skipped=skipped)
    mean = np.mean(np.stack(errors), axis=0)
    return PoseMetric(
        yaw=float(mean[0]),
        pitch=float(mean[1]),
        roll=float(mean[2]),
        count=len(errors),
        skipped=skipped,
    )


def eval_background(
    finals: Sequence[np.ndarray], bases: Sequence[np.ndarray], masks: Sequence[np.ndarray]
) -> BackgroundMetric:
    """Fraction of mask-0 pixels whose three bytes match between final and base.

    Raises:
        DimensionError: If lengths or shapes disagree
    """
    if not len(finals) == len(bases) == len(masks):
        msg = f"got {len(finals)} finals, {len(bases)} bases and {len(masks)} masks"
        raise DimensionError(msg)
    equal = 0
    total = 0
    for final, base, mask in zip(finals, bases, masks, strict=True):
        _check_image(final)
        _check_image(base)
        hard = np.asarray(mask, dtype=bool)
        if final.shape != base.shape or hard.shape != final.shape[:2]:
            msg = f"final {final.shape}, base {base.shape} and mask {hard.shape} disagree"
            raise DimensionError(msg)
        background = ~hard
        same = (final == base).all(axis=2)
        equal += int(same[background].sum())
        total += int(background.sum())
    rate = equal / total if total else 1.0
    return BackgroundMetric(rate=rate, pixels=total, count=len(finals), empty=total == 0)


def _region_mean(image: np.ndarray, region: np.ndarray) -> np.ndarray | None:
    if not region.any():
        return None
    return image[region].astype(np.float64).mean(axis=0)


def attribute_regions(ann: AnnotationSet) -> dict[str, np.ndarray]:
    """Boolean ``hair``, ``eye`` and ``background`` regions of one image."""
    mask = ann.hard_mask()
    h, w = mask.shape
    hair = np.zeros_like(mask)
    rows = np.flatnonzero(mask.any(axis=1))
    if rows.size:
        top = int(rows[0])
        cols = mask[top]
        for r in range(max(0, top - _HAIR_BAND_ROWS), top):
            hair[r] = cols
    yy, xx = np.mgrid[0:h, 0:w]
    centres = np.stack([xx + 0.5, yy + 0.5], axis=-1)
    eye = np.zeros_like(mask)
    for point in ann.landmarks[:2]:
        eye |= ((centres - point) ** 2).sum(axis=-1) <= _EYE_RADIUS**2
    background = ~mask
    background[: h - max(1, int(round(h * _BACKGROUND_BAND)))] = False
    return {"hair": hair, "eye": eye, "background": background}


def classify_attributes(image: np.ndarray, ann: AnnotationSet) -> dict[str, str | None]:
    """Nearest palette colour name per attribute; None where the region is empty."""
    _check_image(image)
    palettes: Mapping[str, dict[str, tuple[int, int, int]]] = {
        "hair": HAIR_COLORS,
        "eye": EYE_COLORS,
        "background": BACKGROUND_COLORS,
    }
    names: dict[str, str | None] = {}
    for key, region in attribute_regions(ann).items():
        mean = _region_mean(image, region)
        names[key] = None if mean is None else nearest_color(palettes[key], mean)
    return names


def parse_caption(caption: str) -> dict[str, str] | None:
    match = _CAPTION_PATTERN.fullmatch(caption.strip())
    if match is None:
        return None
    hair, eye, direction, background = match.groups()
    return {"hair": hair, "eye": eye, "direction": direction, "background": background}


def eval_attributes(
    images: Sequence[np.ndarray], captions: Sequence[str], annotations: Sequence[AnnotationSet]
) -> AttributeMetric:
    """Share of images whose classified hair, eye and background colours match the caption.

    Raises:
        DimensionError: If the inputs differ in length
    """
    if not len(images) == len(captions) == len(annotations):
        msg = (
            f"got {len(images)} images, {len(captions)} captions "
            f"and {len(annotations)} annotation sets"
        )
        raise DimensionError(msg)
    hits = {"hair": 0, "eye": 0, "background": 0}
    count = 0
    for image, caption, ann in zip(images, captions, annotations, strict=True):
        wanted = parse_caption(caption)
        if wanted is None:
            _logger.warning("Attribute metric skipped unparsable caption %r", caption)
            continue
        got = classify_attributes(image, ann)
        count += 1
        for key in hits:
            hits[key] += int(got[key] == wanted[key])
    skipped = len(images) - count
    if count == 0:
        return AttributeMetric(skipped=skipped)
    return AttributeMetric(
        hair=hits["hair"] / count,
        eye=hits["eye"] / count,
        background=hits["background"] / count,
        count=count,
        skipped=skipped,
    )


def eval_annotations(
    pred: Sequence[AnnotationSet], gt: Sequence[AnnotationSet]
) -> AnnotationMetric:
    """Mask IoU, depth MAE inside the union of masks and mean landmark error.

    A pair whose masks are both empty has IoU 1 and contributes no depth term.

    Raises:
        DimensionError: If lengths or map sizes disagree
    """
    if len(pred) != len(gt):
        msg = f"got {len(pred)} predictions for {len(gt)} references"
        raise DimensionError(msg)
    ious: list[float] = []
    maes: list[float] = []
    lmk: list[float] = []
    for p, g in zip(pred, gt, strict=True):
        if p.mask.shape != g.mask.shape:
            msg = f"annotation sizes differ: {p.mask.shape} vs {g.mask.shape}"
            raise DimensionError(msg)
        pm, gm = p.hard_mask(), g.hard_mask()
        union = pm | gm
        n_union = int(union.sum())
        ious.append(float((pm & gm).sum()) / n_union if n_union else 1.0)
        if n_union:
            maes.append(float(np.abs(p.depth - g.depth)[union].mean()))
        lmk.append(float(np.linalg.norm(p.landmarks - g.landmarks, axis=1).mean()))
    return AnnotationMetric(
        mask_iou=_mean_or_none(ious),
        depth_mae=_mean_or_none(maes),
        landmark_px=_mean_or_none(lmk),
        count=len(ious),
    )


def eval_diversity(groups: Mapping[int, Sequence[np.ndarray]]) -> DiversityMetric:
    """Mean absolute pixel distance (in [0, 1]) over same-identity image pairs."""
    distances: list[float] = []
    used = 0
    for images in groups.values():
        if len(images) < 2:
            continue
        used += 1
        for a, b in itertools.combinations(images, 2):
            _check_image(a)
            _check_image(b)
            diff = np.abs(a.astype(np.float64) - b.astype(np.float64))
            distances.append(float(diff.mean()) / 255.0)
    return DiversityMetric(mean=_mean_or_none(distances), pairs=len(distances), groups=used)
