"""Image conversion and file I/O.

The diffusion state lives in ``[-1, 1]`` channel-first float arrays; files and
metrics use 8-bit channel-last arrays. Pillow handles every on-disk format
(binary PPM ``P6`` for colour, PGM ``P5`` for grayscale, PNG for either),
chosen by file suffix.
"""

from __future__ import annotations

from pathlib import Path
from typing import Final

import numpy as np
from PIL import Image

from dense_face.exceptions import ArtifactIOError, DimensionError

_FORMATS: Final[dict[str, str]] = {".ppm": "PPM", ".pgm": "PPM", ".png": "PNG"}


def to_uint8(x: np.ndarray) -> np.ndarray:
    """Decode a ``[3, H, W]`` array in ``[-1, 1]`` to ``[H, W, 3]`` bytes."""
    if x.ndim != 3 or x.shape[0] != 3:
        msg = f"expected [3, H, W] image, got {x.shape}"
        raise DimensionError(msg)
    scaled = np.round((np.clip(x, -1.0, 1.0) + 1.0) * 127.5)
    return np.ascontiguousarray(scaled.astype(np.uint8).transpose(1, 2, 0))


def from_uint8(rgb: np.ndarray, dtype: type[np.floating] = np.float32) -> np.ndarray:
    """Encode ``[H, W, 3]`` bytes as a ``[3, H, W]`` array in ``[-1, 1]``."""
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        msg = f"expected [H, W, 3] image, got {rgb.shape}"
        raise DimensionError(msg)
    return (rgb.astype(dtype).transpose(2, 0, 1) / 127.5 - 1.0).astype(dtype)


def unit_to_uint8(values: np.ndarray) -> np.ndarray:
    """Quantize a map in ``[0, 1]`` to 8-bit grayscale."""
    return np.round(np.clip(values, 0.0, 1.0) * 255.0).astype(np.uint8)


def _format_for(path: Path) -> str:
    fmt = _FORMATS.get(path.suffix.lower())
    if fmt is None:
        msg = f"unsupported image suffix '{path.suffix}' for {path}"
        raise ArtifactIOError(msg)
    return fmt


def write_image(path: Path, pixels: np.ndarray) -> None:
    """Write ``[H, W, 3]`` (colour) or ``[H, W]`` (grayscale) uint8 pixels."""
    if pixels.dtype != np.uint8 or pixels.ndim not in (2, 3):
        msg = f"expected uint8 [H, W] or [H, W, 3] pixels, got {pixels.dtype} {pixels.shape}"
        raise DimensionError(msg)
    try:
        Image.fromarray(np.ascontiguousarray(pixels)).save(path, format=_format_for(path))
    except OSError as exc:
        msg = f"cannot write image {path}: {exc}"
        raise ArtifactIOError(msg) from exc


def read_rgb(path: Path) -> np.ndarray:
    """Read any Pillow-readable image as ``[H, W, 3]`` uint8."""
    try:
        with Image.open(path) as img:
            return np.asarray(img.convert("RGB"), dtype=np.uint8).copy()
    except OSError as exc:
        msg = f"cannot read image {path}: {exc}"
        raise ArtifactIOError(msg) from exc


def read_gray(path: Path) -> np.ndarray:
    """Read an image as ``[H, W]`` uint8 luminance."""
    try:
        with Image.open(path) as img:
            return np.asarray(img.convert("L"), dtype=np.uint8).copy()
    except OSError as exc:
        msg = f"cannot read image {path}: {exc}"
        raise ArtifactIOError(msg) from exc


def resize_rgb(rgb: np.ndarray, size: int) -> np.ndarray:
    """Bilinear resize of ``[H, W, 3]`` uint8 pixels to ``size x size``."""
    img = Image.fromarray(np.ascontiguousarray(rgb))
    return np.asarray(img.resize((size, size), Image.Resampling.BILINEAR), dtype=np.uint8)


def mask_bbox(mask: np.ndarray) -> tuple[int, int, int, int] | None:
    """Return ``(top, bottom, left, right)`` (exclusive ends) of a boolean mask."""
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    if rows.size == 0:
        return None
    return int(rows[0]), int(rows[-1]) + 1, int(cols[0]), int(cols[-1]) + 1


def crop_to_mask(x: np.ndarray, mask: np.ndarray, size: int) -> np.ndarray | None:
    """Crop a ``[3, H, W]`` image to the mask bounding box and resize.

    Returns:
        ``[3, size, size]`` float32 crop in ``[-1, 1]``, or None for an empty mask
    """
    box = mask_bbox(mask)
    if box is None:
        return None
    top, bottom, left, right = box
    rgb = to_uint8(x)[top:bottom, left:right]
    return from_uint8(resize_rgb(rgb, size))
