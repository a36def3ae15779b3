"""Noise schedules and the forward (noising) process.

``make_schedule`` builds per-timestep ``beta``, ``alpha = 1 - beta`` and the
cumulative product ``alpha_bar`` in float64. The cosine schedule follows the
squared-cosine signal curve with offset ``s = 0.008``; its betas are capped
at 0.999 so the last step stays strictly inside (0, 1).
"""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np
from numpy.typing import ArrayLike

from dense_face.constants import Constants, ScheduleKind
from dense_face.exceptions import ConfigError, DimensionError, TimestepRangeError
from dense_face.tensor_core import Tensor


@dataclass(frozen=True)
class NoiseSchedule:
    """Variance plan of the forward diffusion.

    Attributes:
        kind: Schedule family
        T: Number of training timesteps
        betas: Per-step noise variance, shape ``[T]``
        alphas: ``1 - betas``
        alpha_bars: Cumulative product of ``alphas``; strictly decreasing
    """

    kind: ScheduleKind
    T: int
    betas: np.ndarray
    alphas: np.ndarray
    alpha_bars: np.ndarray

    def check_timesteps(self, t: ArrayLike) -> np.ndarray:
        """Return ``t`` as an int64 array, raising if any entry is outside ``[0, T)``."""
        arr = np.asarray(t, dtype=np.int64)
        if arr.size and (arr.min() < 0 or arr.max() >= self.T):
            msg = f"timestep {t!r} outside [0, {self.T})"
            raise TimestepRangeError(msg)
        return arr


def _cosine_betas(T: int, s: float) -> np.ndarray:
    steps = np.arange(T + 1, dtype=np.float64) / T
    f = np.cos((steps + s) / (1.0 + s) * math.pi / 2.0) ** 2
    signal = f / f[0]
    betas = 1.0 - signal[1:] / signal[:-1]
    return np.clip(betas, 0.0, Constants.COSINE_MAX_BETA)


def make_schedule(kind: ScheduleKind | str = ScheduleKind.COSINE, T: int = 1000) -> NoiseSchedule:
    """Build a ``NoiseSchedule``.

    Args:
        kind: ``cosine`` (default) or ``linear`` (beta from 1e-4 to 0.02)
        T: Number of timesteps, at least 10

    Raises:
        ConfigError: If ``T < 10`` or the kind is unknown
    """
    try:
        kind = ScheduleKind(kind)
    except ValueError as exc:
        msg = f"unknown schedule kind '{kind}'"
        raise ConfigError(msg) from exc
    if T < Constants.MIN_TIMESTEPS:
        msg = f"schedule needs T >= {Constants.MIN_TIMESTEPS}, got {T}"
        raise ConfigError(msg)
    if kind is ScheduleKind.COSINE:
        betas = _cosine_betas(T, Constants.COSINE_OFFSET)
    else:
        betas = np.linspace(Constants.LINEAR_BETA_START, Constants.LINEAR_BETA_END, T)
    alphas = 1.0 - betas
    return NoiseSchedule(kind, T, betas, alphas, np.cumprod(alphas))


def _values(x: Tensor | np.ndarray) -> np.ndarray:
    return x.data if isinstance(x, Tensor) else np.asarray(x)


def _per_sample(coef: np.ndarray, ndim: int) -> np.ndarray:
    return coef.reshape(coef.shape + (1,) * (ndim - coef.ndim))


def add_noise(
    x0: Tensor | np.ndarray, eps: Tensor | np.ndarray, t: ArrayLike, sched: NoiseSchedule
) -> np.ndarray:
    """Sample ``x_t = sqrt(alpha_bar[t]) * x0 + sqrt(1 - alpha_bar[t]) * eps``.

    ``t`` is either a single timestep or one per leading batch element.

    Raises:
        DimensionError: If ``x0`` and ``eps`` differ in shape
        TimestepRangeError: If ``t`` is outside ``[0, T)``
    """
    xv, ev = _values(x0), _values(eps)
    if xv.shape != ev.shape:
        msg = f"add_noise: x0 {xv.shape} and eps {ev.shape} differ"
        raise DimensionError(msg)
    tt = sched.check_timesteps(t)
    ab = sched.alpha_bars[tt]
    signal = _per_sample(np.sqrt(ab), xv.ndim)
    noise = _per_sample(np.sqrt(1.0 - ab), xv.ndim)
    return (signal * xv + noise * ev).astype(xv.dtype)
