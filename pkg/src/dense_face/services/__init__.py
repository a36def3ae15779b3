"""Services package for dense-face.

Services coordinate configuration, persistence and run bookkeeping for the
command-line entry points.

Main Components:
- ConfigService: environment settings and training-config resolution
- ModelService: saving and loading network checkpoints
- RunRecorder: run manifests written on success and on failure
"""

from .config_service import ConfigService
from .manifest_service import RunRecorder, read_manifest, write_manifest
from .model_service import LoadedModel, ModelService

__all__ = [
    "ConfigService",
    "LoadedModel",
    "ModelService",
    "RunRecorder",
    "read_manifest",
    "write_manifest",
]
