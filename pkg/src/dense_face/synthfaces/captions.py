"""Templated captions and the closed caption vocabulary."""

from __future__ import annotations

from string import Formatter
from typing import TYPE_CHECKING, Final

from dense_face.constants import Constants

from .palettes import BACKGROUND_COLORS, EYE_COLORS, HAIR_COLORS

if TYPE_CHECKING:
    from dense_face.conditioning import PoseCondition

    from .renderer import SpriteSpec

CAPTION_TEMPLATE: Final[str] = (
    "a face with {hair} hair and {eye} eyes looking {direction} on a {bg} background"
)
DIRECTIONS: Final[tuple[str, ...]] = ("left", "right", "up", "down", "ahead")


def direction_of(pose: PoseCondition) -> str:
    """Bin yaw/pitch into a gaze word.

    The larger-magnitude angle decides; angles within 15 degrees read as
    ``ahead``. Positive yaw is the viewer's right, positive pitch is down.
    """
    threshold = Constants.DIRECTION_THRESHOLD_DEG
    if abs(pose.yaw) >= abs(pose.pitch):
        if abs(pose.yaw) > threshold:
            return "right" if pose.yaw > 0 else "left"
    elif abs(pose.pitch) > threshold:
        return "down" if pose.pitch > 0 else "up"
    return "ahead"


def caption_of(spec: SpriteSpec) -> str:
    return CAPTION_TEMPLATE.format(
        hair=spec.hair_name,
        eye=spec.eye_name,
        direction=direction_of(spec.pose),
        bg=spec.background_name,
    )


def caption_words() -> set[str]:
    """Every word any emitted caption can contain."""
    literal = " ".join(text for text, _, _, _ in Formatter().parse(CAPTION_TEMPLATE))
    words = set(literal.split())
    words |= set(HAIR_COLORS) | set(EYE_COLORS) | set(BACKGROUND_COLORS) | set(DIRECTIONS)
    return words
