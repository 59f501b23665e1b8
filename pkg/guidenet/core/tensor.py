"""Dense float64 tensors with reverse-mode differentiation.

Every primitive in ``guidenet.core.ops`` produces its result through ``make_result``,
which links the output to a ``Node`` holding the inputs and a backward closure.
``backward`` walks those nodes in reverse topological order. A ``Graph`` can
additionally record every executed primitive (with or without gradients) so callers
can audit which parts of a model ran.
"""
import threading
from contextlib import contextmanager
from typing import Callable, Iterator, Optional, Sequence

import numpy as np

from guidenet.core.errors import ContractError, NumericError

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


class _State(threading.local):
    def __init__(self):
        self.grad_enabled = True
        self.graph: Optional["Graph"] = None
        self.scopes: list[str] = []
        self.check_finite = False


_state = _State()


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "name", "_node")

    def __init__(self, data, requires_grad: bool = False, name: str = ""):
        array = np.asarray(data, dtype=np.float64)
        self.data = array if array.flags.c_contiguous else np.ascontiguousarray(array)
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self.name = name
        self._node: Optional[Node] = None

    # --- CONSTRUCTORS ---
    @classmethod
    def zeros(cls, *shape: int, requires_grad: bool = False, name: str = "") -> "Tensor":
        return cls(np.zeros(shape), requires_grad=requires_grad, name=name)

    # --- PROPERTIES ---
    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def is_leaf(self) -> bool:
        return self._node is None

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(()))

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self, graph: Optional["Graph"] = None) -> None:
        backward(self, graph)

    # --- OPERATORS (thin wrappers over ops) ---
    def __add__(self, other):
        from guidenet.core import ops
        return ops.add(self, _as_tensor(other))

    __radd__ = __add__

    def __sub__(self, other):
        from guidenet.core import ops
        return ops.sub(self, _as_tensor(other))

    def __mul__(self, other):
        from guidenet.core import ops
        if isinstance(other, (int, float)):
            return ops.scale(self, float(other))
        return ops.mul(self, _as_tensor(other))

    __rmul__ = __mul__

    def __neg__(self):
        from guidenet.core import ops
        return ops.scale(self, -1.0)

    def __matmul__(self, other):
        from guidenet.core import ops
        return ops.matmul(self, other)

    def sum(self) -> "Tensor":
        from guidenet.core import ops
        return ops.sum_all(self)

    def mean(self) -> "Tensor":
        from guidenet.core import ops
        return ops.mean_all(self)

    def reshape(self, *shape: int) -> "Tensor":
        from guidenet.core import ops
        return ops.reshape(self, shape)

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{label})"


def _as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


class Node:
    """One executed primitive: inputs, output, backward closure and the active scope."""

    __slots__ = ("op", "inputs", "output", "backward_fn", "scope")

    def __init__(self, op: str, inputs: tuple, output: Tensor, backward_fn: Optional[BackwardFn], scope: str):
        self.op = op
        self.inputs = inputs
        self.output = output
        self.backward_fn = backward_fn
        self.scope = scope

    def __repr__(self) -> str:
        return f"Node({self.op}, scope={self.scope!r}, out={self.output.shape})"


class Graph:
    """Ordered record of the primitives executed while ``record()`` is active."""

    def __init__(self):
        self.nodes: list[Node] = []

    @contextmanager
    def record(self) -> Iterator["Graph"]:
        previous, _state.graph = _state.graph, self
        try:
            yield self
        finally:
            _state.graph = previous

    def ops(self) -> list[str]:
        return [node.op for node in self.nodes]

    def scopes(self) -> set[str]:
        return {node.scope for node in self.nodes}

    def ops_in_scope(self, scope: str) -> list[str]:
        return [node.op for node in self.nodes if node.scope == scope]

    def __len__(self) -> int:
        return len(self.nodes)


# --- MODES ---
def grad_enabled() -> bool:
    return _state.grad_enabled


@contextmanager
def no_grad() -> Iterator[None]:
    previous, _state.grad_enabled = _state.grad_enabled, False
    try:
        yield
    finally:
        _state.grad_enabled = previous


@contextmanager
def scope(name: str) -> Iterator[None]:
    _state.scopes.append(name)
    try:
        yield
    finally:
        _state.scopes.pop()


def current_scope() -> str:
    return _state.scopes[-1] if _state.scopes else ""


@contextmanager
def check_finite() -> Iterator[None]:
    """Debug mode: every primitive output is checked for NaN/Inf."""
    previous, _state.check_finite = _state.check_finite, True
    try:
        yield
    finally:
        _state.check_finite = previous


def make_result(op: str, data: np.ndarray, inputs: tuple, backward_fn: BackwardFn) -> Tensor:
    needs_grad = _state.grad_enabled and any(t.requires_grad for t in inputs)
    out = Tensor(data, requires_grad=needs_grad)
    if _state.check_finite and not np.isfinite(out.data).all():
        raise NumericError(f"Non-finite values produced by {op} in scope '{current_scope()}'")
    graph = _state.graph
    if needs_grad or graph is not None:
        node = Node(op, inputs, out, backward_fn if needs_grad else None, current_scope())
        if needs_grad:
            out._node = node
        if graph is not None:
            graph.nodes.append(node)
    return out


# --- BACKWARD ---
def _topological_nodes(root: Tensor) -> list[Node]:
    order: list[Node] = []
    visited: set[int] = set()
    stack: list[tuple[Node, bool]] = [(root._node, False)] if root._node is not None else []
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for t in node.inputs:
            if t._node is not None and id(t._node) not in visited:
                stack.append((t._node, False))
    return order


def backward(loss: Tensor, graph: Optional[Graph] = None) -> None:
    """Accumulate dLoss/dT into ``T.grad`` for every requires_grad tensor reachable from loss.

    Gradients add onto whatever ``grad`` already holds; call ``zero_grad`` to clear.
    With a recorded ``graph`` the tape order is used instead of a topological sort;
    the graph must then cover the whole computation of ``loss``.
    """
    if loss.data.size != 1:
        raise ContractError(f"backward() needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        raise ContractError("loss does not depend on any tensor that requires grad")

    if graph is not None:
        nodes = [n for n in graph.nodes if n.backward_fn is not None]
    else:
        nodes = _topological_nodes(loss)

    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    touched: dict[int, Tensor] = {id(loss): loss}
    for node in reversed(nodes):
        upstream = grads.get(id(node.output))
        if upstream is None:
            continue
        for t, g in zip(node.inputs, node.backward_fn(upstream)):
            if g is None or not t.requires_grad:
                continue
            key = id(t)
            if key in grads:
                grads[key] = grads[key] + g
            else:
                grads[key] = g
                touched[key] = t

    for key, t in touched.items():
        g = grads[key]
        t.grad = g.copy() if t.grad is None else t.grad + g
