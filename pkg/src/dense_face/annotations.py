"""Dense face annotations: five landmarks, a face mask and a depth map.

``AnnotationSet`` is produced both by the sprite renderer (ground truth) and
by the dense heads (predictions), so it lives outside either package. The
file formats are shared too: mask and depth as 8-bit grayscale PGM/PNG and
landmarks as a five-line ``name x y`` text file.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Final

import numpy as np

from dense_face.exceptions import ArtifactIOError, ContractError, DimensionError
from dense_face.imaging import read_gray, unit_to_uint8, write_image

LANDMARK_NAMES: Final[tuple[str, ...]] = (
    "left_eye",
    "right_eye",
    "nose",
    "mouth_left",
    "mouth_right",
)


@dataclass(frozen=True)
class AnnotationSet:
    """Landmarks ``[5, 2]`` as (x, y) pixels, mask and depth ``[H, W]`` in [0, 1]."""

    landmarks: np.ndarray
    mask: np.ndarray
    depth: np.ndarray

    def __post_init__(self) -> None:
        if self.landmarks.shape != (len(LANDMARK_NAMES), 2):
            msg = f"landmarks must be [5, 2], got {self.landmarks.shape}"
            raise DimensionError(msg)
        if self.mask.shape != self.depth.shape or self.mask.ndim != 2:
            msg = f"mask {self.mask.shape} and depth {self.depth.shape} must be equal [H, W]"
            raise DimensionError(msg)

    @property
    def size(self) -> int:
        return int(self.mask.shape[0])

    def validate(self) -> None:
        """Check value ranges.

        Raises:
            ContractError: If a landmark leaves the frame or a map leaves [0, 1]
        """
        h, w = self.mask.shape
        xs, ys = self.landmarks[:, 0], self.landmarks[:, 1]
        if (xs < 0).any() or (xs > w).any() or (ys < 0).any() or (ys > h).any():
            msg = "landmark outside the image frame"
            raise ContractError(msg)
        for name, arr in (("mask", self.mask), ("depth", self.depth)):
            if (arr < 0).any() or (arr > 1).any():
                msg = f"{name} values outside [0, 1]"
                raise ContractError(msg)

    def hard_mask(self, threshold: float = 0.5) -> np.ndarray:
        return self.mask >= threshold


def format_landmarks(landmarks: np.ndarray) -> str:
    lines = [
        f"{name} {x:.6f} {y:.6f}"
        for name, (x, y) in zip(LANDMARK_NAMES, landmarks.tolist(), strict=True)
    ]
    return "\n".join(lines) + "\n"


def write_landmarks(path: Path, landmarks: np.ndarray) -> None:
    try:
        path.write_text(format_landmarks(landmarks), encoding="utf-8")
    except OSError as exc:
        msg = f"cannot write landmarks {path}: {exc}"
        raise ArtifactIOError(msg) from exc


def read_landmarks(path: Path) -> np.ndarray:
    """Parse a ``name x y`` landmark file in canonical order."""
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        msg = f"cannot read landmarks {path}: {exc}"
        raise ArtifactIOError(msg) from exc
    points: dict[str, tuple[float, float]] = {}
    for line in text.splitlines():
        parts = line.split()
        if len(parts) == 3:
            points[parts[0]] = (float(parts[1]), float(parts[2]))
    missing = [n for n in LANDMARK_NAMES if n not in points]
    if missing:
        msg = f"landmark file {path} lacks {', '.join(missing)}"
        raise ArtifactIOError(msg)
    return np.array([points[n] for n in LANDMARK_NAMES], dtype=np.float64)


def export_annotations(
    annotations: AnnotationSet, out_dir: Path, stem: str = "annotations", suffix: str = ".pgm"
) -> dict[str, Path]:
    """Write mask, depth and landmarks next to each other.

    Returns:
        Mapping of ``mask``/``depth``/``landmarks`` to the written paths
    """
    paths = {
        "mask": out_dir / f"{stem}_mask{suffix}",
        "depth": out_dir / f"{stem}_depth{suffix}",
        "landmarks": out_dir / f"{stem}_landmarks.txt",
    }
    write_image(paths["mask"], unit_to_uint8(annotations.mask))
    write_image(paths["depth"], unit_to_uint8(annotations.depth))
    write_landmarks(paths["landmarks"], annotations.landmarks)
    return paths


def load_annotations(mask_path: Path, depth_path: Path, landmarks_path: Path) -> AnnotationSet:
    """Load an ``AnnotationSet`` written by ``export_annotations`` or the dataset writer."""
    mask = read_gray(mask_path).astype(np.float64) / 255.0
    depth = read_gray(depth_path).astype(np.float64) / 255.0
    return AnnotationSet(read_landmarks(landmarks_path), mask, depth)
