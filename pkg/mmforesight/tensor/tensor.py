import itertools
import threading
from contextlib import contextmanager
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..exceptions import ContractError, DimensionError, GraphStateError

_DEFAULT_DTYPE = np.float32
_grad_state = threading.local()


def set_default_dtype(dtype) -> None:
    """
    Sets the element precision used for new tensors and parameters.
    Gradient checks run at float64, training defaults to float32.
    """
    global _DEFAULT_DTYPE
    dtype = np.dtype(dtype)
    if dtype.kind != "f":
        raise ValueError("Default dtype must be a floating point type")
    _DEFAULT_DTYPE = dtype.type


def get_default_dtype():
    return _DEFAULT_DTYPE


@contextmanager
def default_dtype(dtype) -> Iterator[None]:
    previous = get_default_dtype()
    set_default_dtype(dtype)
    try:
        yield
    finally:
        set_default_dtype(previous)


def is_grad_enabled() -> bool:
    return getattr(_grad_state, "enabled", True)


@contextmanager
def no_grad() -> Iterator[None]:
    """
    Disables graph recording for the current thread
    """
    previous = is_grad_enabled()
    _grad_state.enabled = False
    try:
        yield
    finally:
        _grad_state.enabled = previous


class Node:
    def __init__(
        self,
        op: str,
        inputs: Tuple["Tensor", ...],
        backward: Callable[[np.ndarray], Sequence[Optional[np.ndarray]]],
        output: "Tensor",
    ) -> None:
        self.op = op
        self.inputs = inputs
        self.backward = backward
        self.output = output
        self.seq = Graph.next_seq()
        self.consumed = False

    def release(self) -> None:
        self.consumed = True
        self.inputs = ()
        self.backward = None
        self.output = None

    def __str__(self) -> str:
        return "Node[op={}, seq={}, consumed={}]".format(
            self.op, self.seq, self.consumed
        )


class Graph:
    """
    Append-only record of the operations that produced a tensor. Nodes are
    ordered by the sequence number they were given on creation, so reverse
    append order is a valid reverse topological order.
    """

    _lock = threading.Lock()
    _counter = itertools.count()

    def __init__(self, nodes: List[Node]) -> None:
        self._nodes = sorted(nodes, key=lambda node: node.seq)

    @classmethod
    def next_seq(cls) -> int:
        with cls._lock:
            return next(cls._counter)

    @classmethod
    def from_output(cls, tensor: "Tensor") -> "Graph":
        if tensor._node is None:
            raise ContractError("Tensor is not on a graph")

        if tensor._node.consumed:
            raise GraphStateError("Graph has already been consumed by backward")

        seen = set()
        nodes = []
        stack = [tensor._node]
        while stack:
            node = stack.pop()
            if id(node) in seen:
                continue
            if node.consumed:
                raise GraphStateError("Graph has already been consumed by backward")
            seen.add(id(node))
            nodes.append(node)
            for parent in node.inputs:
                if parent._node is not None:
                    stack.append(parent._node)

        return cls(nodes)

    @property
    def nodes(self) -> List[Node]:
        return list(self._nodes)

    def __len__(self) -> int:
        return len(self._nodes)

    def backward(self, root: "Tensor", seed: np.ndarray) -> None:
        pending: Dict[int, np.ndarray] = {id(root): seed}

        for node in reversed(self._nodes):
            output = node.output
            grad = pending.pop(id(output), None)
            if grad is None:
                node.release()
                continue

            output.grad = grad
            input_grads = node.backward(grad)

            for parent, parent_grad in zip(node.inputs, input_grads):
                if parent_grad is None or not parent.requires_grad:
                    continue

                if parent._node is None:
                    parent._accumulate(parent_grad)
                elif id(parent) in pending:
                    pending[id(parent)] = pending[id(parent)] + parent_grad
                else:
                    pending[id(parent)] = parent_grad

            node.release()


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    __array_priority__ = 100

    def __init__(self, data, requires_grad: bool = False, dtype=None) -> None:
        if isinstance(data, Tensor):
            data = data.data

        if dtype is not None:
            array = np.asarray(data, dtype=dtype)
        elif isinstance(data, np.ndarray) and data.dtype.kind == "f":
            array = data
        else:
            array = np.asarray(data, dtype=get_default_dtype())

        self.data: np.ndarray = array
        self.requires_grad: bool = requires_grad
        self.grad: Optional[np.ndarray] = None
        self._node: Optional[Node] = None

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def is_leaf(self) -> bool:
        return self._node is None

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def _accumulate(self, grad: np.ndarray) -> None:
        grad = grad.astype(self.data.dtype, copy=False)
        if self.grad is None:
            self.grad = grad.copy()
        else:
            self.grad = self.grad + grad

    def backward(self) -> None:
        """
        Runs reverse-mode differentiation from this scalar tensor. The graph is
        consumed afterwards; call backward on a fresh forward pass.
        """
        if self.data.size != 1:
            raise ContractError(
                f"backward needs a scalar loss, got shape {self.shape}"
            )
        graph = Graph.from_output(self)
        graph.backward(self, np.ones_like(self.data))

    @staticmethod
    def _result(
        data: np.ndarray,
        parents: Sequence["Tensor"],
        backward: Callable[[np.ndarray], Sequence[Optional[np.ndarray]]],
        op: str,
    ) -> "Tensor":
        parents = tuple(parents)
        requires_grad = is_grad_enabled() and any(p.requires_grad for p in parents)
        out = Tensor(data, requires_grad=requires_grad)
        if requires_grad:
            out._node = Node(op, parents, backward, out)
        return out

    def _lift(self, other) -> "Tensor":
        if isinstance(other, Tensor):
            return other
        return Tensor(np.asarray(other, dtype=self.data.dtype))

    def __add__(self, other) -> "Tensor":
        other = self._lift(other)
        a, b = self, other

        def backward(grad):
            return _unbroadcast(grad, a.shape), _unbroadcast(grad, b.shape)

        return Tensor._result(a.data + b.data, (a, b), backward, "add")

    def __radd__(self, other) -> "Tensor":
        return self.__add__(other)

    def __sub__(self, other) -> "Tensor":
        other = self._lift(other)
        a, b = self, other

        def backward(grad):
            return _unbroadcast(grad, a.shape), _unbroadcast(-grad, b.shape)

        return Tensor._result(a.data - b.data, (a, b), backward, "sub")

    def __rsub__(self, other) -> "Tensor":
        return self._lift(other).__sub__(self)

    def __mul__(self, other) -> "Tensor":
        other = self._lift(other)
        a, b = self, other

        def backward(grad):
            return (
                _unbroadcast(grad * b.data, a.shape),
                _unbroadcast(grad * a.data, b.shape),
            )

        return Tensor._result(a.data * b.data, (a, b), backward, "mul")

    def __rmul__(self, other) -> "Tensor":
        return self.__mul__(other)

    def __truediv__(self, other) -> "Tensor":
        other = self._lift(other)
        a, b = self, other

        def backward(grad):
            return (
                _unbroadcast(grad / b.data, a.shape),
                _unbroadcast(-grad * a.data / (b.data * b.data), b.shape),
            )

        return Tensor._result(a.data / b.data, (a, b), backward, "div")

    def __neg__(self) -> "Tensor":
        return Tensor._result(-self.data, (self,), lambda grad: (-grad,), "neg")

    def __pow__(self, exponent: float) -> "Tensor":
        if isinstance(exponent, Tensor):
            raise ContractError("Only scalar exponents are supported")
        a = self

        def backward(grad):
            return (grad * exponent * a.data ** (exponent - 1),)

        return Tensor._result(a.data**exponent, (a,), backward, "pow")

    def __matmul__(self, other) -> "Tensor":
        other = self._lift(other)
        a, b = self, other
        if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
            raise DimensionError(f"Cannot matmul {a.shape} with {b.shape}")

        def backward(grad):
            return grad @ b.data.T, a.data.T @ grad

        return Tensor._result(a.data @ b.data, (a, b), backward, "matmul")

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        a = self

        def backward(grad):
            if axis is not None and not keepdims:
                grad = np.expand_dims(grad, axis)
            return (np.broadcast_to(grad, a.shape).copy(),)

        return Tensor._result(
            np.asarray(a.data.sum(axis=axis, keepdims=keepdims)), (a,), backward, "sum"
        )

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        count = self.data.size if axis is None else np.prod(
            [self.shape[i] for i in np.atleast_1d(axis)]
        )
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / count)

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        a = self
        return Tensor._result(
            a.data.reshape(shape),
            (a,),
            lambda grad: (grad.reshape(a.shape),),
            "reshape",
        )

    def transpose(self, *axes) -> "Tensor":
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        a = self
        inverse = np.argsort(axes)
        return Tensor._result(
            a.data.transpose(axes),
            (a,),
            lambda grad: (grad.transpose(inverse),),
            "transpose",
        )

    def broadcast_to(self, shape: Tuple[int, ...]) -> "Tensor":
        a = self
        return Tensor._result(
            np.broadcast_to(a.data, shape).copy(),
            (a,),
            lambda grad: (_unbroadcast(grad, a.shape),),
            "broadcast",
        )

    def __getitem__(self, index) -> "Tensor":
        a = self

        def backward(grad):
            full = np.zeros_like(a.data)
            np.add.at(full, index, grad)
            return (full,)

        return Tensor._result(np.array(a.data[index]), (a,), backward, "index")

    def exp(self) -> "Tensor":
        out_data = np.exp(self.data)
        return Tensor._result(out_data, (self,), lambda grad: (grad * out_data,), "exp")

    def __len__(self) -> int:
        return self.shape[0]

    def __repr__(self) -> str:
        return self.__str__()

    def __str__(self) -> str:
        return "Tensor[shape={}, dtype={}, requires_grad={}]".format(
            self.shape, self.dtype, self.requires_grad
        )


TensorLike = Union[Tensor, np.ndarray, float]


def as_tensor(value: TensorLike) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(value)
