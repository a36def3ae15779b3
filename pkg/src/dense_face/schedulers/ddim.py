"""Deterministic (DDIM) reverse sampling.

A ``SamplerPlan`` walks a strictly decreasing subsequence of timesteps that
starts at ``T - 1`` and, for two or more steps, ends at 0. Each transition
``t -> t_prev`` uses ``ddim_step``; the final entry is read out with
``predict_x0``. A one-step plan is the single entry ``T - 1``, read out
straight to the clean sample, so every plan costs exactly ``steps`` model
evaluations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from dense_face.exceptions import ConfigError, ContractError

from .noise import NoiseSchedule


@dataclass(frozen=True)
class SamplerPlan:
    """Inference timesteps (strictly decreasing from ``T - 1``) and stochasticity."""

    steps: int
    timesteps: tuple[int, ...]
    eta: float = 0.0

    def transitions(self) -> list[tuple[int, int | None]]:
        """Pairs ``(t, t_prev)``; ``t_prev`` is None for the final read-out."""
        nxt: list[int | None] = [*self.timesteps[1:], None]
        return list(zip(self.timesteps, nxt, strict=True))


def plan_timesteps(T: int, steps: int, eta: float = 0.0) -> SamplerPlan:
    """Evenly spaced decreasing timesteps from ``T - 1`` down to 0.

    With ``steps == 1`` the plan is ``(T - 1,)``: the sampler goes from ``T - 1``
    to the clean sample in its one read-out.

    Raises:
        ConfigError: If ``steps`` is outside ``[1, T]`` or ``eta`` outside [0, 1]
    """
    if steps < 1 or steps > T:
        msg = f"steps must lie in [1, {T}], got {steps}"
        raise ConfigError(msg)
    if not 0.0 <= eta <= 1.0:
        msg = f"eta must lie in [0, 1], got {eta}"
        raise ConfigError(msg)
    if steps == 1:
        return SamplerPlan(1, (T - 1,), eta)
    grid = np.floor(np.linspace(T - 1, 0, steps) + 0.5).astype(np.int64)
    return SamplerPlan(steps, tuple(int(t) for t in grid), eta)


def predict_x0(
    x_t: np.ndarray, eps_hat: np.ndarray, t: int, sched: NoiseSchedule, *, clamp: bool = True
) -> np.ndarray:
    """Invert the forward process: ``(x_t - sqrt(1 - ab) * eps) / sqrt(ab)``."""
    sched.check_timesteps(t)
    ab = sched.alpha_bars[t]
    x0 = (x_t - np.sqrt(1.0 - ab) * eps_hat) / np.sqrt(ab)
    if clamp:
        x0 = np.clip(x0, -1.0, 1.0)
    return x0.astype(x_t.dtype)


def ddim_step(
    x_t: np.ndarray,
    eps_hat: np.ndarray,
    t: int,
    t_prev: int,
    eta: float,
    sched: NoiseSchedule,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """One DDIM transition from ``t`` to ``t_prev``.

    The clean estimate is clamped to [-1, 1]. Noise ``z`` is drawn from
    ``rng`` only when ``eta > 0``.

    Raises:
        ContractError: If ``t <= t_prev`` or ``eta > 0`` without an ``rng``
        ConfigError: If ``eta`` is outside [0, 1]
    """
    if t <= t_prev:
        msg = f"ddim_step needs t > t_prev, got t={t} t_prev={t_prev}"
        raise ContractError(msg)
    if not 0.0 <= eta <= 1.0:
        msg = f"eta must lie in [0, 1], got {eta}"
        raise ConfigError(msg)
    sched.check_timesteps([t, t_prev])
    ab_t = sched.alpha_bars[t]
    ab_prev = sched.alpha_bars[t_prev]
    x0 = predict_x0(x_t, eps_hat, t, sched)
    sigma = eta * np.sqrt((1.0 - ab_prev) / (1.0 - ab_t)) * np.sqrt(1.0 - ab_t / ab_prev)
    direction = np.sqrt(max(1.0 - ab_prev - sigma * sigma, 0.0)) * eps_hat
    x_prev = np.sqrt(ab_prev) * x0 + direction
    if eta > 0:
        if rng is None:
            msg = "ddim_step with eta > 0 needs an rng"
            raise ContractError(msg)
        x_prev = x_prev + sigma * rng.standard_normal(x_t.shape)
    return x_prev.astype(x_t.dtype)
