"""Run manifests.

``RunRecorder`` collects what a CLI command resolved and produced, and
writes a ``RunManifest`` JSON file when the command ends, whether it
succeeded or failed.
"""

from __future__ import annotations

from collections.abc import Mapping
from datetime import UTC, datetime
from pathlib import Path
import time
from typing import Any

from fastmcp.utilities.logging import get_logger

from dense_face.exceptions import ArtifactIOError
from dense_face.models import RunManifest

_logger = get_logger(__name__)


def _now() -> str:
    return datetime.now(UTC).isoformat()


class RunRecorder:
    """Accumulates one command's manifest."""

    def __init__(self, command: str, path: Path | None = None) -> None:
        self.path = path
        self._t0 = time.perf_counter()
        self.manifest = RunManifest(command=command, started_at=_now())

    def set_config(self, config: Mapping[str, Any]) -> None:
        self.manifest.config.update(config)

    def seed(self, name: str, value: int) -> None:
        self.manifest.seeds[name] = int(value)

    def checkpoint(self, path: Path, content_hash: str) -> None:
        self.manifest.checkpoints[str(path)] = content_hash

    def artifact(self, role: str, path: Path) -> None:
        self.manifest.artifacts[role] = str(path)

    def finish(self, exit_code: int, error: str | None = None) -> RunManifest:
        """Close the record and write it when a path is set.

        Raises:
            ArtifactIOError: If the manifest cannot be written
        """
        m = self.manifest
        m.finished_at = _now()
        m.wall_clock_sec = round(time.perf_counter() - self._t0, 3)
        m.exit_code = exit_code
        m.status = "ok" if exit_code == 0 else "error"
        m.error = error
        if self.path is not None:
            write_manifest(self.path, m)
        return m


def write_manifest(path: Path, manifest: RunManifest) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(manifest.model_dump_json(indent=2) + "\n", encoding="utf-8")
    except OSError as exc:
        msg = f"cannot write run manifest {path}: {exc}"
        raise ArtifactIOError(msg) from exc
    _logger.info("Wrote run manifest %s", path)


def read_manifest(path: Path) -> RunManifest:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        msg = f"cannot read run manifest {path}: {exc}"
        raise ArtifactIOError(msg) from exc
    return RunManifest.model_validate_json(text)
