"""Generation entry points and latent blending.

Main Components:
- GenerationPipeline: text-editing, face-generation and personalized sampling
  with classifier-free guidance
- GenerationRequest / GenerationResult / BlendMask: request and result types
- ellipse_mask / load_mask / write_mask / dilate_mask: blend-mask helpers
"""

from .blending import (
    blend_background,
    dilate_mask,
    ellipse_mask,
    load_mask,
    threshold_mask,
    write_mask,
)
from .generation import GenerationPipeline, apply_guidance
from .models import BlendMask, GenerateMode, GenerationRequest, GenerationResult

__all__ = [
    "BlendMask",
    "GenerateMode",
    "GenerationPipeline",
    "GenerationRequest",
    "GenerationResult",
    "apply_guidance",
    "blend_background",
    "dilate_mask",
    "ellipse_mask",
    "load_mask",
    "threshold_mask",
    "write_mask",
]
