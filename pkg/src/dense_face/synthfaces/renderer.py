"""Procedural face-sprite renderer and its analytic pose inverse.

Geometry, in continuous pixel coordinates with the pixel ``(i, j)`` centred
at ``(j + 0.5, i + 0.5)`` and the face centred at ``(32, 32)`` on a 64 frame:

- face ellipse with semi-axes ``a = 20 + 4 * width``, ``b = 26 + 3 * height``
- half eye distance ``h = 4 + 3 * eye_spacing``; eyes at ``(+-h, -1.2h - 1)``
- nose tip at ``(0, 0.5h + 1)``; mouth corners at ``(+-(3 + 3 * mouth), h + 3)``
- features are shifted by ``(10 sin yaw, 10 sin pitch)`` and then, together
  with the face ellipse, rotated by ``roll`` about the centre

Positive yaw moves the features to the viewer's right; positive pitch moves
them down. The mask is the open ellipse interior and depth is
``1 - r`` inside it, where ``r`` is the normalized elliptical radius.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np

from dense_face.annotations import AnnotationSet
from dense_face.conditioning import PoseCondition
from dense_face.constants import Constants
from dense_face.exceptions import DomainError, PoseRecoveryError
from dense_face.imaging import from_uint8, to_uint8

from .captions import caption_of
from .palettes import (
    BACKGROUND_COLORS,
    EYE_COLORS,
    HAIR_COLORS,
    MOUTH_COLOR,
    PALETTE_SIZE,
    SKIN_TONES,
    color_name,
    palette_index,
)

ID_PARAM_NAMES = (
    "face_width",
    "face_height",
    "eye_spacing",
    "eye_size",
    "mouth_width",
    "skin_tone",
    "hair_color",
    "eye_color",
)


@dataclass(frozen=True)
class SpriteSpec:
    """Identity parameters, pose, background colour index and seed of one sprite."""

    id_params: tuple[float, ...]
    pose: PoseCondition = field(default_factory=PoseCondition)
    background: int = 0
    seed: int = 0

    def __post_init__(self) -> None:
        if len(self.id_params) != Constants.ID_PARAM_COUNT:
            count = Constants.ID_PARAM_COUNT
            msg = f"expected {count} identity parameters, got {len(self.id_params)}"
            raise DomainError(msg)
        if any(not (0.0 <= p <= 1.0) for p in self.id_params):
            msg = "identity parameters must lie in [0, 1]"
            raise DomainError(msg)
        if not 0 <= self.background < PALETTE_SIZE:
            msg = f"background index {self.background} outside [0, {PALETTE_SIZE})"
            raise DomainError(msg)

    @property
    def params(self) -> np.ndarray:
        return np.asarray(self.id_params, dtype=np.float64)

    @property
    def skin_rgb(self) -> tuple[int, int, int]:
        return SKIN_TONES[palette_index(self.id_params[5])]

    @property
    def hair_name(self) -> str:
        return color_name(HAIR_COLORS, palette_index(self.id_params[6]))

    @property
    def eye_name(self) -> str:
        return color_name(EYE_COLORS, palette_index(self.id_params[7]))

    @property
    def background_name(self) -> str:
        return color_name(BACKGROUND_COLORS, self.background)


@dataclass(frozen=True)
class SpriteSample:
    """Rendered image ``[3, H, W]`` in [-1, 1] with caption and annotations."""

    image: np.ndarray
    caption: str
    annotations: AnnotationSet
    spec: SpriteSpec

    @property
    def pixels(self) -> np.ndarray:
        """The exact 8-bit ``[H, W, 3]`` rendering."""
        return to_uint8(self.image)


@dataclass(frozen=True)
class FaceGeometry:
    """Scalar layout derived from identity parameters."""

    a: float
    b: float
    half_eye: float
    eye_radius: float
    mouth_half: float

    @classmethod
    def of(cls, spec: SpriteSpec) -> FaceGeometry:
        w, h, spacing, eye, mouth = spec.id_params[:5]
        return cls(
            a=20.0 + 4.0 * w,
            b=26.0 + 3.0 * h,
            half_eye=4.0 + 3.0 * spacing,
            eye_radius=1.5 + eye,
            mouth_half=3.0 + 3.0 * mouth,
        )

    def rest_landmarks(self) -> np.ndarray:
        """Landmark offsets from the centre before pose, ``[5, 2]``."""
        h = self.half_eye
        return np.array(
            [
                [-h, -1.2 * h - 1.0],
                [h, -1.2 * h - 1.0],
                [0.0, 0.5 * h + 1.0],
                [-self.mouth_half, h + 3.0],
                [self.mouth_half, h + 3.0],
            ],
            dtype=np.float64,
        )


def _rotate(offsets: np.ndarray, degrees: float) -> np.ndarray:
    theta = math.radians(degrees)
    c, s = math.cos(theta), math.sin(theta)
    x, y = offsets[..., 0], offsets[..., 1]
    return np.stack([c * x - s * y, s * x + c * y], axis=-1)


def sprite_landmarks(spec: SpriteSpec, size: int = Constants.IMAGE_SIZE) -> np.ndarray:
    """Exact landmark pixel coordinates ``[5, 2]`` of a sprite."""
    geom = FaceGeometry.of(spec)
    kappa = Constants.POSE_SHIFT_PX
    yaw, pitch = math.radians(spec.pose.yaw), math.radians(spec.pose.pitch)
    shift = np.array([kappa * math.sin(yaw), kappa * math.sin(pitch)])
    centre = size / 2.0
    return _rotate(geom.rest_landmarks() + shift, spec.pose.roll) + centre


def render(spec: SpriteSpec, size: int = Constants.IMAGE_SIZE) -> SpriteSample:
    """Rasterize a sprite deterministically.

    Pixels are composed as 8-bit colours first, so the returned float image
    decodes back to exactly the same bytes.
    """
    geom = FaceGeometry.of(spec)
    centre = size / 2.0
    coords = np.arange(size, dtype=np.float64) + 0.5
    X, Y = np.meshgrid(coords, coords)
    # face frame: undo roll about the centre
    frame = _rotate(np.stack([X - centre, Y - centre], axis=-1), -spec.pose.roll)
    u, v = frame[..., 0], frame[..., 1]
    radius = np.sqrt((u / geom.a) ** 2 + (v / geom.b) ** 2)
    inside = radius < 1.0
    depth = np.where(inside, 1.0 - radius, 0.0)
    hair = (
        ~inside
        & (v < 0.0)
        & ((u / (geom.a + 4.0)) ** 2 + ((v + 2.0) / (geom.b + 4.0)) ** 2 < 1.0)
    )

    rgb = np.empty((size, size, 3), dtype=np.float64)
    rgb[...] = BACKGROUND_COLORS[spec.background_name]
    rgb[hair] = HAIR_COLORS[spec.hair_name]
    skin = np.asarray(spec.skin_rgb, dtype=np.float64)
    rgb[inside] = skin[None, :] * (0.8 + 0.2 * depth[inside])[:, None]

    landmarks = sprite_landmarks(spec, size)
    pts = np.stack([X, Y], axis=-1)
    for eye in landmarks[:2]:
        disc = ((pts - eye) ** 2).sum(axis=-1) <= geom.eye_radius**2
        rgb[disc] = EYE_COLORS[spec.eye_name]
    nose = ((pts - landmarks[2]) ** 2).sum(axis=-1) <= 1.0
    rgb[nose] = skin * 0.6
    rgb[_segment_distance(pts, landmarks[3], landmarks[4]) <= 0.8] = MOUTH_COLOR

    pixels = np.clip(np.round(rgb), 0, 255).astype(np.uint8)
    annotations = AnnotationSet(
        landmarks=landmarks, mask=inside.astype(np.float64), depth=depth
    )
    return SpriteSample(
        image=from_uint8(pixels), caption=caption_of(spec), annotations=annotations, spec=spec
    )


def _segment_distance(pts: np.ndarray, p0: np.ndarray, p1: np.ndarray) -> np.ndarray:
    seg = p1 - p0
    length2 = float(seg @ seg)
    t = np.clip(((pts - p0) @ seg) / length2, 0.0, 1.0)
    closest = p0 + t[..., None] * seg
    return np.sqrt(((pts - closest) ** 2).sum(axis=-1))


def _asin_degrees(value: float) -> float:
    return math.degrees(math.asin(max(-1.0, min(1.0, value))))


def recover_pose(landmarks: np.ndarray, size: int = Constants.IMAGE_SIZE) -> PoseCondition:
    """Invert the renderer's pose model from five landmarks.

    Roll is the angle of the eye vector. After undoing roll, yaw and pitch
    are read from the nose tip's displacement from its rest position
    ``(centre, centre + 0.5h + 1)``, with ``h`` half the measured eye distance.

    Raises:
        PoseRecoveryError: If the eye landmarks coincide or are not finite
    """
    pts = np.asarray(landmarks, dtype=np.float64)
    if pts.shape != (5, 2) or not np.isfinite(pts).all():
        msg = f"expected five finite landmarks, got shape {pts.shape}"
        raise PoseRecoveryError(msg)
    eye_vec = pts[1] - pts[0]
    distance = math.hypot(eye_vec[0], eye_vec[1])
    if distance < 1e-9:
        msg = "eye landmarks coincide; pose is undefined"
        raise PoseRecoveryError(msg)
    roll = math.degrees(math.atan2(eye_vec[1], eye_vec[0]))
    centre = size / 2.0
    nose = _rotate(pts[2] - centre, -roll)
    half_eye = distance / 2.0
    kappa = Constants.POSE_SHIFT_PX
    yaw = _asin_degrees(float(nose[0]) / kappa)
    pitch = _asin_degrees((float(nose[1]) - (0.5 * half_eye + 1.0)) / kappa)
    limit = Constants.POSE_LIMIT_DEG
    return PoseCondition(
        yaw=float(np.clip(yaw, -limit, limit)),
        pitch=float(np.clip(pitch, -limit, limit)),
        roll=float(np.clip(roll, -limit, limit)),
    )
