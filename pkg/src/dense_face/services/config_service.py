"""Configuration service for dense-face.

Centralizes environment variable handling and training-config resolution.
Precedence is built-in defaults < config file < command-line flags; the
resolved ``TrainConfig`` is what run manifests record.
"""

from __future__ import annotations

from collections.abc import Mapping
import json
import os
from pathlib import Path
from typing import Any

from pydantic import ValidationError

from dense_face.constants import Constants
from dense_face.exceptions import ArtifactIOError, ConfigError
from dense_face.models import TrainConfig

_LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


class ConfigService:
    """Service for environment settings and configuration files."""

    @staticmethod
    def threads() -> int:
        """Worker cap from ``DENSEFACE_THREADS``; falls back to the CPU count."""
        fallback = os.cpu_count() or 1
        val = os.getenv(Constants.ENV_THREADS)
        if not val:
            return fallback
        try:
            n = int(val)
        except ValueError:
            n = fallback
        return max(1, n)

    @staticmethod
    def log_level() -> str:
        """Log level from ``DENSEFACE_LOG_LEVEL`` (default INFO)."""
        val = os.getenv(Constants.ENV_LOG_LEVEL, "INFO").strip().upper()
        return val if val in _LOG_LEVELS else "INFO"

    @staticmethod
    def workers(*, deterministic: bool = False) -> int:
        """Loader worker count: one when determinism is requested."""
        return 1 if deterministic else ConfigService.threads()

    @staticmethod
    def parse_config_text(text: str) -> dict[str, Any]:
        """Parse a JSON object or ``key=value`` lines.

        Blank lines and lines starting with ``#`` are ignored in the
        key-value form; values stay strings and are coerced by ``TrainConfig``.

        Raises:
            ConfigError: On malformed input
        """
        stripped = text.strip()
        if stripped.startswith("{"):
            try:
                data = json.loads(stripped)
            except json.JSONDecodeError as exc:
                msg = f"invalid JSON config: {exc}"
                raise ConfigError(msg) from exc
            if not isinstance(data, dict):
                msg = "JSON config must be an object"
                raise ConfigError(msg)
            return data
        values: dict[str, Any] = {}
        for number, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep or not key.strip():
                msg = f"config line {number} is not key=value: {raw!r}"
                raise ConfigError(msg)
            values[key.strip().replace("-", "_")] = value.strip()
        return values

    @staticmethod
    def load_config_file(path: Path) -> dict[str, Any]:
        """Read a UTF-8 config file (JSON or key=value).

        Raises:
            ArtifactIOError: If the file cannot be read
            ConfigError: If its content is malformed
        """
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            msg = f"cannot read config file {path}: {exc}"
            raise ArtifactIOError(msg) from exc
        return ConfigService.parse_config_text(text)

    @staticmethod
    def resolve_train_config(
        path: Path | None = None, overrides: Mapping[str, Any] | None = None
    ) -> TrainConfig:
        """Merge defaults, the optional config file and flag overrides.

        ``None`` values in ``overrides`` mean "flag not given" and are skipped.

        Raises:
            ConfigError: If a key is unknown or a value fails validation
        """
        merged: dict[str, Any] = {}
        if path is not None:
            merged.update(ConfigService.load_config_file(path))
        merged.update({k: v for k, v in (overrides or {}).items() if v is not None})
        try:
            return TrainConfig.model_validate(merged)
        except ValidationError as exc:
            msg = f"invalid training configuration: {exc}"
            raise ConfigError(msg) from exc
