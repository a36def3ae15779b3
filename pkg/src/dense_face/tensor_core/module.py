"""Parameter containers and basic layers.

``Module`` tracks ``Parameter`` attributes and child modules by attribute
assignment, giving every weight a stable dotted name (``unet.encoder.conv_in.weight``).
Those names are the keys of the checkpoint tensor table, and freezing a
module simply turns off ``requires_grad`` on its parameters.

Layers use the row-vector convention: ``Linear`` computes ``x @ W + b`` with
``W`` of shape ``[in, out]``.
"""

from __future__ import annotations

from collections.abc import Iterable, Iterator, Mapping
import math

import numpy as np
from numpy.typing import ArrayLike

from dense_face.exceptions import ConfigError, ContractError, DimensionError

from . import ops
from .tensor import Tensor


class Parameter(Tensor):
    """A leaf tensor owned by a module; trainable unless frozen."""

    def __init__(
        self,
        data: ArrayLike,
        *,
        dtype: np.dtype[np.floating] | type[np.floating] | None = None,
        requires_grad: bool = True,
    ) -> None:
        super().__init__(data, requires_grad=requires_grad, dtype=dtype)


class Module:
    """Base class for anything that owns parameters."""

    def __init__(self) -> None:
        object.__setattr__(self, "_params", {})
        object.__setattr__(self, "_modules", {})

    def __setattr__(self, name: str, value: object) -> None:
        params: dict[str, Parameter] | None = self.__dict__.get("_params")
        modules: dict[str, Module] | None = self.__dict__.get("_modules")
        if params is None or modules is None:
            msg = f"{type(self).__name__}.__init__ must call Module.__init__ first"
            raise ContractError(msg)
        params.pop(name, None)
        modules.pop(name, None)
        if isinstance(value, Parameter):
            params[name] = value
        elif isinstance(value, Module):
            modules[name] = value
        object.__setattr__(self, name, value)

    # ---- traversal ---------------------------------------------------------
    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Parameter]]:
        """Yield ``(dotted_name, parameter)`` in registration order."""
        params: dict[str, Parameter] = self.__dict__["_params"]
        modules: dict[str, Module] = self.__dict__["_modules"]
        for name, param in params.items():
            yield f"{prefix}{name}", param
        for name, child in modules.items():
            yield from child.named_parameters(f"{prefix}{name}.")

    def parameters(self) -> list[Parameter]:
        return [p for _, p in self.named_parameters()]

    def trainable_parameters(self) -> list[Parameter]:
        return [p for p in self.parameters() if p.requires_grad]

    def children(self) -> Iterator[tuple[str, Module]]:
        modules: dict[str, Module] = self.__dict__["_modules"]
        yield from modules.items()

    def parameter_count(self) -> int:
        return sum(p.size for p in self.parameters())

    # ---- training state ----------------------------------------------------
    def freeze(self) -> None:
        """Stop gradients for every parameter in this module tree."""
        for p in self.parameters():
            p.requires_grad = False
            p.grad = None

    def unfreeze(self) -> None:
        for p in self.parameters():
            p.requires_grad = True

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def cast(self, dtype: type[np.floating]) -> Module:
        """Convert every parameter buffer in place; returns ``self``."""
        for p in self.parameters():
            p.data = p.data.astype(dtype)
            p.grad = None
        return self

    # ---- persistence -------------------------------------------------------
    def state_dict(self, prefix: str = "") -> dict[str, np.ndarray]:
        """Return copies of every parameter keyed by dotted name."""
        return {name: p.data.copy() for name, p in self.named_parameters(prefix)}

    def load_state_dict(
        self, state: Mapping[str, np.ndarray], prefix: str = "", *, strict: bool = True
    ) -> None:
        """Copy arrays from ``state`` into matching parameters.

        Raises:
            ContractError: If ``strict`` and a parameter is missing from ``state``
            DimensionError: If a stored array has the wrong shape
        """
        for name, p in self.named_parameters(prefix):
            if name not in state:
                if strict:
                    msg = f"missing tensor '{name}'"
                    raise ContractError(msg)
                continue
            arr = np.asarray(state[name])
            if arr.shape != p.shape:
                msg = f"tensor '{name}' has shape {arr.shape}, expected {p.shape}"
                raise DimensionError(msg)
            p.data = arr.astype(p.dtype, copy=True)
            p.grad = None


class ModuleList(Module):
    """Ordered container of child modules named ``0``, ``1``, ..."""

    def __init__(self, modules: Iterable[Module] = ()) -> None:
        super().__init__()
        self._items: list[Module] = []
        for m in modules:
            self.append(m)

    def append(self, module: Module) -> None:
        setattr(self, str(len(self._items)), module)
        self._items.append(module)

    def __iter__(self) -> Iterator[Module]:
        return iter(self._items)

    def __len__(self) -> int:
        return len(self._items)

    def __getitem__(self, index: int) -> Module:
        return self._items[index]


class ModuleDict(Module):
    """String-keyed container; keys may contain ``/`` (site paths)."""

    def __init__(self, modules: Mapping[str, Module] | None = None) -> None:
        super().__init__()
        for key, m in (modules or {}).items():
            self[key] = m

    def __setitem__(self, key: str, module: Module) -> None:
        self.__dict__["_modules"][key] = module

    def __getitem__(self, key: str) -> Module:
        return self.__dict__["_modules"][key]

    def __contains__(self, key: object) -> bool:
        return key in self.__dict__["_modules"]

    def keys(self) -> list[str]:
        return list(self.__dict__["_modules"])

    def items(self) -> list[tuple[str, Module]]:
        return list(self.__dict__["_modules"].items())

    def get(self, key: str) -> Module | None:
        return self.__dict__["_modules"].get(key)

    def __len__(self) -> int:
        return len(self.__dict__["_modules"])


def _normal(
    rng: np.random.Generator, shape: tuple[int, ...], std: float, dtype: type[np.floating]
) -> np.ndarray:
    return (rng.standard_normal(shape) * std).astype(dtype)


class Linear(Module):
    """Affine map ``x @ weight + bias`` over the last axis."""

    def __init__(
        self,
        in_features: int,
        out_features: int,
        *,
        rng: np.random.Generator,
        bias: bool = True,
        init_scale: float = 1.0,
        dtype: type[np.floating] = np.float32,
    ) -> None:
        super().__init__()
        std = init_scale / math.sqrt(in_features)
        self.weight = Parameter(_normal(rng, (in_features, out_features), std, dtype))
        self.bias = Parameter(np.zeros(out_features, dtype=dtype)) if bias else None

    def forward(self, x: Tensor) -> Tensor:
        y = ops.matmul(x, self.weight) if x.ndim >= 2 else self._vector(x)
        return ops.add(y, self.bias) if self.bias is not None else y

    def _vector(self, x: Tensor) -> Tensor:
        row = ops.reshape(x, (1, x.shape[0]))
        return ops.reshape(ops.matmul(row, self.weight), (self.weight.shape[1],))


class Conv2d(Module):
    """2-D convolution layer with "same" padding by default."""

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        kernel_size: int,
        *,
        rng: np.random.Generator,
        stride: int = 1,
        padding: int | None = None,
        bias: bool = True,
        init_scale: float = 1.0,
        dtype: type[np.floating] = np.float32,
    ) -> None:
        super().__init__()
        fan_in = in_channels * kernel_size * kernel_size
        std = init_scale / math.sqrt(fan_in)
        shape = (out_channels, in_channels, kernel_size, kernel_size)
        self.weight = Parameter(_normal(rng, shape, std, dtype))
        self.bias = Parameter(np.zeros(out_channels, dtype=dtype)) if bias else None
        self.stride = stride
        self.padding = kernel_size // 2 if padding is None else padding

    @property
    def out_channels(self) -> int:
        return self.weight.shape[0]

    def forward(self, x: Tensor) -> Tensor:
        return ops.conv2d(x, self.weight, self.bias, stride=self.stride, pad=self.padding)


class GroupNorm(Module):
    """Group normalization with learned per-channel scale and shift."""

    def __init__(
        self, channels: int, groups: int, *, dtype: type[np.floating] = np.float32
    ) -> None:
        super().__init__()
        if groups <= 0 or channels % groups:
            msg = f"GroupNorm: {channels} channels not divisible into {groups} groups"
            raise ConfigError(msg)
        self.groups = groups
        self.gamma = Parameter(np.ones(channels, dtype=dtype))
        self.beta = Parameter(np.zeros(channels, dtype=dtype))

    def forward(self, x: Tensor) -> Tensor:
        return ops.group_norm(x, self.groups, self.gamma, self.beta)


class LayerNorm(Module):
    """Normalization over the last axis."""

    def __init__(self, dim: int, *, dtype: type[np.floating] = np.float32) -> None:
        super().__init__()
        self.gamma = Parameter(np.ones(dim, dtype=dtype))
        self.beta = Parameter(np.zeros(dim, dtype=dtype))

    def forward(self, x: Tensor) -> Tensor:
        return ops.layer_norm(x, self.gamma, self.beta)
