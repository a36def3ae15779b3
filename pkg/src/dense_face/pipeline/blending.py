"""Blend masks and the per-step background replacement.

A blend mask is a hard ``[S, S]`` boolean array. Predicted masks are grown by
a square max filter (Pillow ``MaxFilter``) of radius ``MASK_DILATION_PX``;
mask files are grayscale images thresholded at the midpoint.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image, ImageFilter

from dense_face.constants import Constants, MaskSource
from dense_face.exceptions import DimensionError
from dense_face.imaging import read_gray, unit_to_uint8, write_image
from dense_face.schedulers import NoiseSchedule, add_noise

from .models import BlendMask


def ellipse_mask(
    size: int = Constants.IMAGE_SIZE,
    a: float = Constants.BLEND_ELLIPSE_A,
    b: float = Constants.BLEND_ELLIPSE_B,
) -> BlendMask:
    """Centred ellipse with horizontal semi-axis ``a`` and vertical ``b`` pixels.

    A pixel is inside when its centre ``(x + 0.5, y + 0.5)`` satisfies
    ``((x - c) / a)^2 + ((y - c) / b)^2 <= 1`` with ``c = size / 2``.
    """
    centres = np.arange(size, dtype=np.float64) + 0.5 - size / 2.0
    dx = (centres[None, :] / a) ** 2
    dy = (centres[:, None] / b) ** 2
    return BlendMask(values=(dx + dy) <= 1.0, source=MaskSource.ELLIPSE)


def threshold_mask(
    probabilities: np.ndarray, threshold: float = Constants.MASK_THRESHOLD
) -> np.ndarray:
    return np.asarray(probabilities) > threshold


def dilate_mask(mask: np.ndarray, pixels: int = Constants.MASK_DILATION_PX) -> np.ndarray:
    """Grow a boolean mask by ``pixels`` in every direction (square neighbourhood)."""
    if pixels <= 0:
        return mask.copy()
    img = Image.fromarray(mask.astype(np.uint8) * 255)
    grown = img.filter(ImageFilter.MaxFilter(2 * pixels + 1))
    return np.asarray(grown, dtype=np.uint8) > 0


def write_mask(path: Path, mask: BlendMask | np.ndarray) -> None:
    """Write a mask as 0/255 grayscale."""
    values = mask.values if isinstance(mask, BlendMask) else mask
    write_image(path, unit_to_uint8(values.astype(np.float64)))


def load_mask(path: Path, size: int = Constants.IMAGE_SIZE) -> BlendMask:
    """Read a grayscale mask file; pixels at or above 128 are face.

    Raises:
        ArtifactIOError: If the file cannot be read
        DimensionError: If the mask is not ``size x size``
    """
    gray = read_gray(path)
    if gray.shape != (size, size):
        msg = f"mask {path} is {gray.shape[1]}x{gray.shape[0]}, expected {size}x{size}"
        raise DimensionError(msg)
    return BlendMask(values=gray >= 128, source=MaskSource.FILE)


def blend_background(
    x_prev: np.ndarray,
    mask: np.ndarray,
    base: np.ndarray,
    eps_fixed: np.ndarray,
    t_prev: int,
    sched: NoiseSchedule,
) -> np.ndarray:
    """Keep ``x_prev`` inside the mask and the base noised to ``t_prev`` outside it.

    At ``t_prev == 0`` the base pixels are copied without noise.
    """
    outside = base if t_prev == 0 else add_noise(base, eps_fixed, t_prev, sched)
    return np.where(mask, x_prev, outside).astype(x_prev.dtype)
