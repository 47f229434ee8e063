"""
Parameters and Optimizer
Named trainable tensors with their Adam moments, plus the bias-corrected Adam update
"""
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Dict, Iterator, Mapping, Optional, Tuple

import numpy as np

from ednn.shared.models.errors import DivergenceError, ShapeError
from ednn.tensor_math.tensor import Tensor


@dataclass
class AdamState:
    """First/second moments per parameter and the shared step counter"""

    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0


class ParamSet:
    """Ordered collection of named parameter tensors and their optimizer state"""

    def __init__(self, arrays: Mapping[str, np.ndarray], dtype: Optional[np.dtype] = None):
        self.tensors: "OrderedDict[str, Tensor]" = OrderedDict()
        for name, array in arrays.items():
            data = np.array(array, dtype=dtype or np.asarray(array).dtype)
            self.tensors[name] = Tensor(data, requires_grad=True, name=name, dtype=data.dtype)
        self.adam = AdamState(
            m={name: np.zeros_like(t.data) for name, t in self.tensors.items()},
            v={name: np.zeros_like(t.data) for name, t in self.tensors.items()},
        )

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    def __contains__(self, name: str) -> bool:
        return name in self.tensors

    def __iter__(self) -> Iterator[str]:
        return iter(self.tensors)

    def __len__(self) -> int:
        return len(self.tensors)

    def items(self):
        return self.tensors.items()

    @property
    def dtype(self) -> np.dtype:
        first = next(iter(self.tensors.values()), None)
        return first.dtype if first is not None else np.dtype(np.float32)

    def shapes(self) -> Dict[str, Tuple[int, ...]]:
        return {name: tensor.shape for name, tensor in self.tensors.items()}

    def arrays(self) -> Dict[str, np.ndarray]:
        return {name: tensor.data for name, tensor in self.tensors.items()}

    def zero_grad(self):
        for tensor in self.tensors.values():
            tensor.zero_grad()

    def astype(self, dtype: np.dtype) -> "ParamSet":
        """Copy with parameters and Adam moments cast to dtype"""
        converted = ParamSet(self.arrays(), dtype=dtype)
        converted.adam = AdamState(
            m={name: value.astype(dtype) for name, value in self.adam.m.items()},
            v={name: value.astype(dtype) for name, value in self.adam.v.items()},
            t=self.adam.t,
        )
        return converted

    def copy(self) -> "ParamSet":
        return self.astype(self.dtype)


def backward(loss: Tensor, params: ParamSet) -> Dict[str, np.ndarray]:
    """Gradients of a scalar loss with respect to every parameter in params.

    Parameters the loss does not depend on get zero gradients; an empty
    ParamSet yields an empty mapping.
    """
    if len(params) == 0:
        return {}
    params.zero_grad()
    loss.backward()
    grads = {}
    for name, tensor in params.items():
        grads[name] = tensor.grad if tensor.grad is not None else np.zeros_like(tensor.data)
        tensor.zero_grad()
    return grads


def adam_step(params: ParamSet, grads: Mapping[str, np.ndarray], lr: float = 1e-4,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> ParamSet:
    """One bias-corrected Adam update applied in place; t advances once per call"""
    for name, tensor in params.items():
        grad = grads.get(name)
        if grad is None or np.shape(grad) != tensor.shape:
            raise ShapeError("Gradient shape does not match parameter",
                             {"parameter": name, "expected": tensor.shape,
                              "got": None if grad is None else np.shape(grad)})
        if not np.all(np.isfinite(grad)):
            raise DivergenceError("Non-finite gradient", {"parameter": name,
                                                          "step": params.adam.t})

    state = params.adam
    state.t += 1
    bias_m = 1.0 - beta1 ** state.t
    bias_v = 1.0 - beta2 ** state.t

    for name, tensor in params.items():
        grad = np.asarray(grads[name], dtype=tensor.dtype)
        m = state.m[name]
        v = state.v[name]
        m *= beta1
        m += (1.0 - beta1) * grad
        v *= beta2
        v += (1.0 - beta2) * (grad * grad)
        m_hat = m / bias_m
        v_hat = v / bias_v
        tensor.data -= (lr * m_hat / (np.sqrt(v_hat) + eps)).astype(tensor.dtype, copy=False)
    return params


class Adam:
    """Adam hyperparameters bound to a ParamSet's state"""

    def __init__(self, lr: float = 1e-4, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps

    def step(self, params: ParamSet, grads: Mapping[str, np.ndarray]) -> ParamSet:
        return adam_step(params, grads, self.lr, self.beta1, self.beta2, self.eps)
