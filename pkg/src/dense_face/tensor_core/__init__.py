"""Dense-tensor numerics with reverse-mode automatic differentiation.

Main Components:
- Tensor / GradTape: define-by-run autodiff over float32/float64 NumPy buffers
- ops: differentiable operations (matmul, softmax, conv2d, group_norm, losses)
- Module / Parameter: named parameter trees with freezing and state dicts
- grad_check: central-difference verification harness

Example Usage:
    >>> from dense_face.tensor_core import Tensor, backward, ops
    >>> x = Tensor([1.0, 2.0], requires_grad=True, dtype=np.float64)
    >>> backward(ops.sum(ops.mul(x, x)))
    >>> x.grad  # array([2., 4.])
"""

from . import ops
from .gradcheck import grad_check, grad_check_parameters
from .module import (
    Conv2d,
    GroupNorm,
    LayerNorm,
    Linear,
    Module,
    ModuleDict,
    ModuleList,
    Parameter,
)
from .tensor import GradTape, Tensor, backward, current_tape, grad_enabled, no_grad

__all__ = [
    "Conv2d",
    "GradTape",
    "GroupNorm",
    "LayerNorm",
    "Linear",
    "Module",
    "ModuleDict",
    "ModuleList",
    "Parameter",
    "Tensor",
    "backward",
    "current_tape",
    "grad_check",
    "grad_check_parameters",
    "grad_enabled",
    "no_grad",
    "ops",
]
