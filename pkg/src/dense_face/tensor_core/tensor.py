"""Tensor type and gradient tape.

A ``Tensor`` wraps a NumPy buffer of dtype float32 or float64. Operations in
``ops`` produce new tensors and, when any input requires gradients and
recording is enabled, append a node to the calling thread's ``GradTape``.
``backward`` replays that tape in reverse execution order and accumulates
gradients into leaf tensors.

The tape keeps weak references to its nodes. A node stays alive for as long as
some tensor produced downstream of it is alive, so forward passes that are
never differentiated release their intermediates normally.
"""

from __future__ import annotations

from collections.abc import Callable, Iterator, Sequence
from contextlib import contextmanager
import itertools
import threading
from typing import Final, Self
import weakref

import numpy as np
from numpy.typing import ArrayLike

from dense_face.exceptions import ContractError, DimensionError, NumericError, TapeStateError

SUPPORTED_DTYPES: Final[tuple[np.dtype[np.floating], ...]] = (
    np.dtype(np.float32),
    np.dtype(np.float64),
)

BackwardFn = Callable[[np.ndarray], Sequence[np.ndarray | None]]

_COMPACT_EVERY: Final[int] = 4096
_LEAF_LOCK = threading.Lock()
_local = threading.local()


def _check_finite(arr: np.ndarray, what: str) -> None:
    if not np.isfinite(arr).all():
        msg = f"{what} produced non-finite values"
        raise NumericError(msg)


class _Node:
    """One recorded operation: its inputs and the closure mapping output grad to input grads."""

    __slots__ = ("__weakref__", "backward_fn", "inputs", "op", "position")

    def __init__(
        self, op: str, inputs: tuple[Tensor, ...], backward_fn: BackwardFn, position: int
    ) -> None:
        self.op = op
        self.inputs = inputs
        self.backward_fn = backward_fn
        self.position = position


class GradTape:
    """Ordered record of executed operations for one thread.

    Nodes are appended in execution order, so replaying the record backwards
    visits every node after all of its consumers. A tape can be replayed once;
    afterwards it is consumed and the owning thread starts a fresh one.

    A tape may also be installed explicitly as a context manager::

        with GradTape() as tape:
            loss = ops.mse(model(x), y)
            backward(loss)
    """

    def __init__(self) -> None:
        self._nodes: list[weakref.ref[_Node]] = []
        self._counter = itertools.count()
        self._consumed = False
        self._previous: GradTape | None = None

    @property
    def consumed(self) -> bool:
        """True once ``backward`` has replayed this tape."""
        return self._consumed

    def __len__(self) -> int:
        return sum(1 for ref in self._nodes if ref() is not None)

    def __enter__(self) -> Self:
        self._previous = getattr(_local, "tape", None)
        _local.tape = self
        return self

    def __exit__(self, *exc: object) -> None:
        _local.tape = self._previous
        self._previous = None

    def record(self, op: str, inputs: tuple[Tensor, ...], backward_fn: BackwardFn) -> _Node:
        """Append a node for an executed operation and return it."""
        if self._consumed:
            msg = f"cannot record '{op}' on a consumed tape"
            raise TapeStateError(msg)
        node = _Node(op, inputs, backward_fn, next(self._counter))
        self._nodes.append(weakref.ref(node))
        if len(self._nodes) % _COMPACT_EVERY == 0:
            self._nodes = [ref for ref in self._nodes if ref() is not None]
        return node

    def replay(self, root: _Node, seed: np.ndarray) -> None:
        """Propagate ``seed`` from ``root`` back to every reachable leaf."""
        if self._consumed:
            msg = "backward called twice on the same tape"
            raise TapeStateError(msg)
        self._consumed = True
        pending: dict[int, np.ndarray] = {id(root): seed}
        for ref in reversed(self._nodes):
            node = ref()
            if node is None:
                continue
            grad = pending.pop(id(node), None)
            if grad is None:
                continue
            input_grads = node.backward_fn(grad)
            for tensor, tensor_grad in zip(node.inputs, input_grads, strict=True):
                if tensor_grad is None or not tensor.requires_grad:
                    continue
                if tensor._node is None:
                    with _LEAF_LOCK:
                        tensor._accumulate(tensor_grad)
                    continue
                key = id(tensor._node)
                prior = pending.get(key)
                pending[key] = tensor_grad if prior is None else prior + tensor_grad
        self._nodes.clear()
        if getattr(_local, "tape", None) is self and self._previous is None:
            _local.tape = None


def current_tape() -> GradTape:
    """Return the calling thread's active tape, creating one when needed."""
    tape: GradTape | None = getattr(_local, "tape", None)
    if tape is None or tape.consumed:
        tape = GradTape()
        _local.tape = tape
    return tape


def grad_enabled() -> bool:
    """True unless the calling thread is inside ``no_grad``."""
    return getattr(_local, "no_grad_depth", 0) == 0


@contextmanager
def no_grad() -> Iterator[None]:
    """Disable recording for the calling thread (inference and evaluation)."""
    _local.no_grad_depth = getattr(_local, "no_grad_depth", 0) + 1
    try:
        yield
    finally:
        _local.no_grad_depth -= 1


class Tensor:
    """N-dimensional float array with optional gradient tracking.

    Attributes:
        data: Row-major NumPy buffer (float32 or float64), always finite
        requires_grad: Whether gradients flow into this tensor
        grad: Accumulated gradient for leaf tensors, same shape and dtype as data
    """

    def __init__(
        self,
        data: ArrayLike,
        *,
        requires_grad: bool = False,
        dtype: np.dtype[np.floating] | type[np.floating] | None = None,
    ) -> None:
        arr = np.array(data, copy=True)
        target = np.dtype(dtype) if dtype is not None else arr.dtype
        if target not in SUPPORTED_DTYPES:
            if dtype is not None:
                msg = f"unsupported tensor dtype {target}; expected float32 or float64"
                raise ContractError(msg)
            target = np.dtype(np.float32)
        arr = arr.astype(target, copy=False)
        if any(dim <= 0 for dim in arr.shape):
            msg = f"tensor dimensions must be positive, got shape {arr.shape}"
            raise DimensionError(msg)
        _check_finite(arr, "tensor construction")
        self.data: np.ndarray = arr
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self._node: _Node | None = None
        self._tape: GradTape | None = None

    @classmethod
    def _wrap(cls, arr: np.ndarray) -> Tensor:
        out = cls.__new__(cls)
        out.data = arr
        out.requires_grad = False
        out.grad = None
        out._node = None
        out._tape = None
        return out

    @classmethod
    def _from_op(
        cls,
        op: str,
        arr: np.ndarray,
        inputs: tuple[Tensor, ...],
        backward_fn: BackwardFn,
        dtype: np.dtype[np.floating],
    ) -> Tensor:
        arr = np.asarray(arr).astype(dtype, copy=False)
        _check_finite(arr, op)
        out = cls._wrap(arr)
        if grad_enabled() and any(t.requires_grad for t in inputs):
            tape = current_tape()
            out._node = tape.record(op, inputs, backward_fn)
            out._tape = tape
            out.requires_grad = True
        return out

    # ---- properties -------------------------------------------------------
    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.data.shape)

    @property
    def dtype(self) -> np.dtype[np.floating]:
        return self.data.dtype

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def is_leaf(self) -> bool:
        return self._node is None

    def numpy(self) -> np.ndarray:
        """Return the underlying buffer (do not mutate it)."""
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            msg = f"item() requires a single element, got shape {self.shape}"
            raise ContractError(msg)
        return float(self.data.reshape(()))

    def detach(self) -> Tensor:
        """Return a tensor sharing data but outside any graph."""
        return Tensor._wrap(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def _accumulate(self, grad: np.ndarray) -> None:
        grad = np.asarray(grad, dtype=self.data.dtype).reshape(self.data.shape)
        self.grad = grad.copy() if self.grad is None else self.grad + grad

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{flag})"

    # ---- operators (delegate to ops) --------------------------------------
    def __add__(self, other: Tensor | float) -> Tensor:
        from dense_face.tensor_core import ops  # noqa: PLC0415

        return ops.add(self, other)

    def __radd__(self, other: float) -> Tensor:
        from dense_face.tensor_core import ops  # noqa: PLC0415

        return ops.add(other, self)

    def __sub__(self, other: Tensor | float) -> Tensor:
        from dense_face.tensor_core import ops  # noqa: PLC0415

        return ops.sub(self, other)

    def __rsub__(self, other: float) -> Tensor:
        from dense_face.tensor_core import ops  # noqa: PLC0415

        return ops.sub(other, self)

    def __mul__(self, other: Tensor | float) -> Tensor:
        from dense_face.tensor_core import ops  # noqa: PLC0415

        return ops.mul(self, other)

    def __rmul__(self, other: float) -> Tensor:
        from dense_face.tensor_core import ops  # noqa: PLC0415

        return ops.mul(other, self)

    def __truediv__(self, other: float) -> Tensor:
        from dense_face.tensor_core import ops  # noqa: PLC0415

        return ops.scale(self, 1.0 / other)

    def __neg__(self) -> Tensor:
        from dense_face.tensor_core import ops  # noqa: PLC0415

        return ops.scale(self, -1.0)

    def __matmul__(self, other: Tensor) -> Tensor:
        from dense_face.tensor_core import ops  # noqa: PLC0415

        return ops.matmul(self, other)


def backward(loss: Tensor) -> None:
    """Populate ``grad`` on every leaf that ``loss`` depends on.

    Args:
        loss: Scalar tensor produced by recorded operations

    Raises:
        ContractError: If ``loss`` is not scalar or was not recorded on any tape
        TapeStateError: If the tape that recorded ``loss`` was already replayed
    """
    if loss.size != 1:
        msg = f"backward requires a scalar loss, got shape {loss.shape}"
        raise ContractError(msg)
    if loss._node is None or loss._tape is None:
        msg = "loss does not depend on any recorded operation (empty tape)"
        raise ContractError(msg)
    loss._tape.replay(loss._node, np.ones_like(loss.data))
