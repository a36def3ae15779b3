"""Finite-difference verification of analytic gradients.

Both checkers compare the tape's gradient against central differences and
report ``max |analytic - numeric| / max(1, |analytic|)``. Non-scalar outputs
are contracted with a fixed random probe so that every output element
contributes (a plain sum would hide errors in, e.g., softmax).
"""

from __future__ import annotations

from collections.abc import Callable, Sequence

import numpy as np

from dense_face.exceptions import ContractError

from . import ops
from .tensor import GradTape, Tensor, backward, no_grad


def _scalarize(out: Tensor, probe: Tensor | None) -> Tensor:
    if probe is None:
        return ops.sum(out)
    return ops.sum(ops.mul(out, probe))


def _pick(size: int, max_checks: int | None, rng: np.random.Generator) -> np.ndarray:
    if max_checks is None or max_checks >= size:
        return np.arange(size)
    return np.sort(rng.choice(size, size=max_checks, replace=False))


def _relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(1.0, abs(analytic))


def grad_check(
    f: Callable[[Tensor], Tensor],
    x: Tensor,
    h: float = 1e-5,
    *,
    max_checks: int | None = None,
    seed: int = 0,
) -> float:
    """Return the maximum relative gradient error of ``f`` at ``x``.

    Args:
        f: Differentiable tensor function
        x: Point of evaluation; must be float64
        h: Central-difference step
        max_checks: Check only this many randomly chosen elements
        seed: Seed for the output probe and element selection

    Raises:
        ContractError: If ``x`` is not float64
    """
    if x.dtype != np.float64:
        msg = f"grad_check requires float64 input, got {x.dtype}"
        raise ContractError(msg)
    rng = np.random.default_rng(seed)
    base = x.data.copy()
    with GradTape():
        leaf = Tensor(base, requires_grad=True)
        out = f(leaf)
        probe = None if out.size == 1 else Tensor(rng.standard_normal(out.shape))
        backward(_scalarize(out, probe))
    analytic = leaf.grad if leaf.grad is not None else np.zeros_like(base)

    worst = 0.0
    with no_grad():
        for flat in _pick(base.size, max_checks, rng):
            plus = base.copy()
            minus = base.copy()
            plus.flat[flat] += h
            minus.flat[flat] -= h
            f_plus = _scalarize(f(Tensor(plus)), probe).item()
            f_minus = _scalarize(f(Tensor(minus)), probe).item()
            numeric = (f_plus - f_minus) / (2.0 * h)
            worst = max(worst, _relative_error(float(analytic.flat[flat]), numeric))
    return worst


def grad_check_parameters(
    loss_fn: Callable[[], Tensor],
    params: Sequence[Tensor],
    h: float = 1e-5,
    *,
    max_checks: int | None = None,
    seed: int = 0,
) -> float:
    """Gradient check of a scalar ``loss_fn`` with respect to module parameters.

    ``loss_fn`` must rebuild its graph on every call. Parameter buffers are
    perturbed in place and restored before returning.
    """
    for p in params:
        if p.dtype != np.float64:
            msg = f"grad_check_parameters requires float64 parameters, got {p.dtype}"
            raise ContractError(msg)
        p.grad = None
    rng = np.random.default_rng(seed)
    with GradTape():
        backward(loss_fn())
    worst = 0.0
    with no_grad():
        for p in params:
            analytic = p.grad if p.grad is not None else np.zeros_like(p.data)
            original = p.data
            for flat in _pick(original.size, max_checks, rng):
                plus = original.copy()
                minus = original.copy()
                plus.flat[flat] += h
                minus.flat[flat] -= h
                p.data = plus
                f_plus = loss_fn().item()
                p.data = minus
                f_minus = loss_fn().item()
                p.data = original
                numeric = (f_plus - f_minus) / (2.0 * h)
                worst = max(worst, _relative_error(float(analytic.flat[flat]), numeric))
    return worst
