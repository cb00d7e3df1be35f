"""Parameter storage, dense layers and MLPs."""
from __future__ import annotations

from collections import OrderedDict

import numpy as np

from . import autograd as ag
from .autograd import Tensor


class ParamStore:
    """Named trainable tensors with a stable flat-vector view."""

    def __init__(self, rng=None):
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.tensors: "OrderedDict[str, Tensor]" = OrderedDict()

    def add(self, name, array) -> Tensor:
        if name in self.tensors:
            raise KeyError(f"duplicate parameter {name!r}")
        t = Tensor(np.array(array, dtype=np.float64), requires_grad=True)
        self.tensors[name] = t
        return t

    def __getitem__(self, name) -> Tensor:
        return self.tensors[name]

    def __iter__(self):
        return iter(self.tensors.items())

    def __len__(self):
        return len(self.tensors)

    def shapes(self) -> dict:
        return {k: t.shape for k, t in self.tensors.items()}

    @property
    def size(self) -> int:
        return int(np.sum([t.data.size for t in self.tensors.values()]))

    def flat(self) -> np.ndarray:
        return np.concatenate([t.data.ravel() for t in self.tensors.values()])

    def load_flat(self, vec):
        vec = np.asarray(vec, dtype=np.float64)
        if vec.size != self.size:
            raise ValueError(f"expected {self.size} values, got {vec.size}")
        k = 0
        for t in self.tensors.values():
            n = t.data.size
            t.data = vec[k : k + n].reshape(t.shape).copy()
            k += n

    def grads(self) -> dict:
        return {k: (np.zeros_like(t.data) if t.grad is None else t.grad) for k, t in self.tensors.items()}

    def flat_grad(self) -> np.ndarray:
        return np.concatenate([g.ravel() for g in self.grads().values()])

    def zero_grad(self):
        for t in self.tensors.values():
            t.grad = None

    def copy_from(self, other: "ParamStore"):
        for k, t in other.tensors.items():
            self.tensors[k].data = t.data.copy()


class Linear:
    def __init__(self, store: ParamStore, name: str, n_in: int, n_out: int):
        bound = 1.0 / np.sqrt(n_in)
        self.w = store.add(f"{name}.w", store.rng.uniform(-bound, bound, size=(n_in, n_out)))
        self.b = store.add(f"{name}.b", store.rng.uniform(-bound, bound, size=(n_out,)))

    def __call__(self, x: Tensor) -> Tensor:
        return ag.add(ag.matmul(x, self.w), self.b)


class MLP:
    """Linear layers with ReLU between them (none after the last)."""

    def __init__(self, store, name, sizes, final_activation=False):
        self.layers = [Linear(store, f"{name}.{k}", a, b) for k, (a, b) in enumerate(zip(sizes[:-1], sizes[1:]))]
        self.final_activation = final_activation

    def __call__(self, x):
        last = len(self.layers) - 1
        for k, layer in enumerate(self.layers):
            x = layer(x)
            if k < last or self.final_activation:
                x = ag.relu(x)
        return x
