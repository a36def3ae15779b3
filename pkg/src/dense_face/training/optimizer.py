"""Adam over a named parameter list.

Moments are kept per dotted parameter name, which is also how they are
stored in a checkpoint (``optimizer.m.<name>`` / ``optimizer.v.<name>``).
A parameter without a gradient is updated as if its gradient were zero, so
with zero moments it does not move at all.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from typing import Final

import numpy as np

from dense_face.constants import Constants
from dense_face.exceptions import ConfigError, ContractError, DimensionError
from dense_face.tensor_core import Parameter

M_PREFIX: Final[str] = "optimizer.m."
V_PREFIX: Final[str] = "optimizer.v."


class Adam:
    """Bias-corrected Adam with a single learning rate."""

    def __init__(
        self,
        params: Sequence[tuple[str, Parameter]],
        *,
        lr: float = Constants.LEARNING_RATE,
        beta1: float = Constants.ADAM_BETA1,
        beta2: float = Constants.ADAM_BETA2,
        eps: float = Constants.ADAM_EPS,
    ) -> None:
        if lr <= 0 or not 0.0 <= beta1 < 1.0 or not 0.0 <= beta2 < 1.0 or eps <= 0:
            msg = f"invalid Adam hyperparameters lr={lr} betas=({beta1}, {beta2}) eps={eps}"
            raise ConfigError(msg)
        names = [name for name, _ in params]
        if len(set(names)) != len(names):
            msg = "duplicate parameter names passed to Adam"
            raise ContractError(msg)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.params: dict[str, Parameter] = dict(params)
        self.m = {n: np.zeros_like(p.data) for n, p in self.params.items()}
        self.v = {n: np.zeros_like(p.data) for n, p in self.params.items()}
        self.step_count = 0

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def step(self) -> None:
        """Apply one update to every parameter from its accumulated gradient."""
        self.step_count += 1
        t = self.step_count
        correction1 = 1.0 - self.beta1**t
        correction2 = 1.0 - self.beta2**t
        for name, p in self.params.items():
            grad = p.grad if p.grad is not None else np.zeros_like(p.data)
            m = self.beta1 * self.m[name] + (1.0 - self.beta1) * grad
            v = self.beta2 * self.v[name] + (1.0 - self.beta2) * grad * grad
            self.m[name] = m.astype(p.dtype)
            self.v[name] = v.astype(p.dtype)
            update = self.lr * (m / correction1) / (np.sqrt(v / correction2) + self.eps)
            p.data = (p.data - update).astype(p.dtype)

    def state_tensors(self) -> dict[str, np.ndarray]:
        out: dict[str, np.ndarray] = {}
        for name in self.params:
            out[M_PREFIX + name] = self.m[name].copy()
            out[V_PREFIX + name] = self.v[name].copy()
        return out

    def load_state(self, tensors: Mapping[str, np.ndarray], step_count: int) -> None:
        """Restore moments saved by ``state_tensors``.

        Raises:
            ContractError: If a moment is missing
            DimensionError: If a moment has the wrong shape
        """
        for name, p in self.params.items():
            for prefix, store in ((M_PREFIX, self.m), (V_PREFIX, self.v)):
                key = prefix + name
                if key not in tensors:
                    msg = f"optimizer state is missing '{key}'"
                    raise ContractError(msg)
                arr = np.asarray(tensors[key])
                if arr.shape != p.shape:
                    msg = f"optimizer state '{key}' has shape {arr.shape}, expected {p.shape}"
                    raise DimensionError(msg)
                store[name] = arr.astype(p.dtype, copy=True)
        self.step_count = int(step_count)


def split_optimizer_tensors(
    tensors: Mapping[str, np.ndarray],
) -> tuple[dict[str, np.ndarray], dict[str, np.ndarray]]:
    """Separate ``optimizer.*`` entries from model weights."""
    weights = {k: v for k, v in tensors.items() if not k.startswith("optimizer.")}
    state = {k: v for k, v in tensors.items() if k.startswith("optimizer.")}
    return weights, state
