"""Named colour palettes for sprite attributes.

Every palette has eight single-word colour names (so captions stay in the
closed vocabulary). A parameter ``p`` in [0, 1] selects entry
``min(int(p * 8), 7)``.
"""

from __future__ import annotations

from typing import Final

import numpy as np

PALETTE_SIZE: Final[int] = 8

SKIN_TONES: Final[tuple[tuple[int, int, int], ...]] = (
    (255, 224, 196),
    (241, 194, 160),
    (224, 172, 128),
    (198, 146, 104),
    (176, 122, 84),
    (141, 94, 62),
    (110, 72, 46),
    (82, 54, 36),
)

HAIR_COLORS: Final[dict[str, tuple[int, int, int]]] = {
    "black": (20, 20, 24),
    "brown": (96, 58, 30),
    "blonde": (232, 200, 110),
    "red": (180, 50, 30),
    "gray": (140, 140, 140),
    "white": (245, 245, 240),
    "blue": (40, 80, 200),
    "green": (40, 150, 70),
}

EYE_COLORS: Final[dict[str, tuple[int, int, int]]] = {
    "brown": (110, 60, 20),
    "blue": (50, 110, 220),
    "green": (50, 160, 80),
    "gray": (150, 155, 160),
    "amber": (220, 150, 30),
    "hazel": (140, 110, 50),
    "black": (15, 15, 15),
    "violet": (140, 70, 190),
}

BACKGROUND_COLORS: Final[dict[str, tuple[int, int, int]]] = {
    "blue": (70, 110, 200),
    "green": (80, 170, 90),
    "red": (200, 60, 60),
    "yellow": (230, 210, 70),
    "purple": (130, 70, 160),
    "orange": (235, 140, 50),
    "gray": (120, 120, 120),
    "white": (250, 250, 250),
}

MOUTH_COLOR: Final[tuple[int, int, int]] = (150, 40, 50)


def palette_index(p: float) -> int:
    return min(int(p * PALETTE_SIZE), PALETTE_SIZE - 1)


def color_name(palette: dict[str, tuple[int, int, int]], index: int) -> str:
    return list(palette)[index]


def nearest_color(palette: dict[str, tuple[int, int, int]], rgb: np.ndarray) -> str:
    """Name of the palette entry closest (Euclidean RGB) to ``rgb``."""
    names = list(palette)
    table = np.array([palette[n] for n in names], dtype=np.float64)
    dist = ((table - np.asarray(rgb, dtype=np.float64)[None, :]) ** 2).sum(axis=1)
    return names[int(np.argmin(dist))]
