"""dense-face package for pose-controllable face personalization.

Trains a small text-conditioned diffusion U-Net with a pose branch, an
identity adapter and dense annotation heads on synthetic face sprites, and
generates personalized faces blended into text-edited scenes.
"""

from dense_face.constants import Constants
from dense_face.models import RunManifest, TrainConfig
from dense_face.services import ConfigService, ModelService, RunRecorder

__version__ = Constants.VERSION

__all__ = [  # noqa: RUF022
    # Core models
    "RunManifest",
    "TrainConfig",
    # Services
    "ConfigService",
    "ModelService",
    "RunRecorder",
    # Constants
    "Constants",
    "__version__",
]
