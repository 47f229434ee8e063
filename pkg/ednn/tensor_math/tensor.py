"""
Tensor Core
Dense tensors over numpy arrays with reverse-mode differentiation
Each op output remembers its parents and a closure mapping the output gradient
to the gradients of its inputs; backward() walks the graph in reverse topological order
"""
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]

DEFAULT_DTYPE = np.dtype(np.float32)


class Tensor:
    """A node in the computation graph"""

    __slots__ = ("data", "grad", "requires_grad", "name", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None,
                 dtype: Optional[np.dtype] = None):
        array = np.asarray(data)
        if dtype is not None:
            array = array.astype(dtype, copy=False)
        elif not np.issubdtype(array.dtype, np.floating):
            array = array.astype(DEFAULT_DTYPE)
        self.data: np.ndarray = array
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self.name = name
        self._parents: Tuple["Tensor", ...] = ()
        self._backward: Optional[BackwardFn] = None

    @classmethod
    def from_op(cls, data: np.ndarray, parents: Iterable["Tensor"],
                backward_fn: BackwardFn) -> "Tensor":
        parents = tuple(parents)
        out = cls(data, requires_grad=any(p.requires_grad for p in parents), dtype=data.dtype)
        if out.requires_grad:
            out._parents = parents
            out._backward = backward_fn
        return out

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    @property
    def is_leaf(self) -> bool:
        return self._backward is None

    def item(self) -> float:
        return float(self.data)

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        return Tensor(self.data, dtype=self.data.dtype)

    def zero_grad(self):
        self.grad = None

    def _topological_order(self) -> List["Tensor"]:
        order: List[Tensor] = []
        visited = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if id(node) in visited:
                continue
            if expanded:
                visited.add(id(node))
                order.append(node)
                continue
            stack.append((node, True))
            for parent in node._parents:
                if parent.requires_grad and id(parent) not in visited:
                    stack.append((parent, False))
        return order

    def backward(self, grad: Optional[np.ndarray] = None):
        """Accumulate d(self)/d(leaf) into .grad of every leaf requiring grad

        The graph is consumed: intermediate nodes drop their parents afterwards.
        """
        if not self.requires_grad:
            return
        seed = np.ones_like(self.data) if grad is None else np.asarray(grad, dtype=self.dtype)
        pending: Dict[int, np.ndarray] = {id(self): seed}

        order = self._topological_order()
        for node in reversed(order):
            node_grad = pending.pop(id(node), None)
            if node_grad is None:
                continue
            if node.is_leaf:
                node.grad = node_grad if node.grad is None else node.grad + node_grad
                continue
            for parent, parent_grad in zip(node._parents, node._backward(node_grad)):
                if parent_grad is None or not parent.requires_grad:
                    continue
                key = id(parent)
                pending[key] = parent_grad if key not in pending else pending[key] + parent_grad

        for node in order:
            if not node.is_leaf:
                node._parents = ()
                node._backward = None

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{label})"


def canonical_sum(values: np.ndarray, axis: int) -> np.ndarray:
    """Sum along an axis in a fixed order independent of element positions.

    Values are sorted along the axis and accumulated left to right, so any
    permutation of the same multiset produces a bitwise-identical result.
    """
    values = np.asarray(values)
    if values.shape[axis] == 0:
        return np.zeros(np.delete(values.shape, axis), dtype=values.dtype)
    ordered = np.sort(values, axis=axis)
    return np.take(np.cumsum(ordered, axis=axis, dtype=values.dtype), -1, axis=axis)
