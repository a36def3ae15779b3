"""Custom exception hierarchy for dense-face.

This module defines every error raised by the package. Each failure category
named by the numerics, conditioning, rendering, training and CLI layers maps
to exactly one class so callers (and the CLI's exit-code mapping) can handle
them precisely.

Exception Categories:
- Tensor errors for shape, numeric and tape-state failures in the autodiff core
- Contract and configuration errors for violated preconditions
- Domain errors for out-of-range identity parameters and poses
- Artifact errors for unreadable paths and corrupt checkpoints
"""

from __future__ import annotations


class DenseFaceError(Exception):
    """Base exception for dense-face operations.

    All other custom exceptions in this module inherit from this class.
    """


class TensorError(DenseFaceError):
    """Base class for failures inside the tensor core."""


class DimensionError(TensorError, ValueError):
    """Raised when operand shapes are incompatible.

    Typical causes:
    - Inner dimensions of a matrix product disagree
    - A convolution kernel does not fit the padded input
    - Pooling is requested on odd spatial dimensions
    - Broadcasting beyond scalar and leading-batch dimensions
    """


class NumericError(TensorError, ArithmeticError):
    """Raised when a value leaves the finite domain.

    NaN or infinity in a tensor is an error state and is never propagated
    silently; log-type operations on non-positive input also raise this.
    """


class TapeStateError(TensorError, RuntimeError):
    """Raised when a gradient tape is replayed after being consumed."""


class ContractError(DenseFaceError, ValueError):
    """Raised when a caller violates an operation's precondition.

    Examples include a non-scalar loss passed to ``backward``, attention where
    every key is masked, or pose features supplied in text-editing mode.
    """


class ConfigError(DenseFaceError, ValueError):
    """Raised for invalid or inconsistent configuration values."""


class DomainError(DenseFaceError, ValueError):
    """Raised when identity parameters or pose angles are out of range."""


class TokenizationError(DenseFaceError, ValueError):
    """Raised when a caption contains unknown words or is too long."""


class TimestepRangeError(DenseFaceError, IndexError):
    """Raised when a diffusion timestep falls outside ``[0, T)``."""


class PoseRecoveryError(DenseFaceError, ValueError):
    """Raised when landmarks are too degenerate to recover a head pose."""


class ArtifactIOError(DenseFaceError, OSError):
    """Raised when a dataset, image or checkpoint path cannot be read or written."""


class CheckpointCorruptError(DenseFaceError):
    """Raised when a checkpoint fails structural or content-hash verification.

    This covers a wrong magic number, an unsupported version, a truncated file
    and any mismatch between the stored and recomputed content hash.
    """


class UsageError(DenseFaceError):
    """Raised for command-line misuse (missing or inconsistent flags)."""
