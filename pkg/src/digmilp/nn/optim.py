from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .layers import ParamStore


@dataclass
class AdamState:
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(store: ParamStore, grads: dict, state: AdamState, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
    """One in-place Adam update of every tensor in ``store``."""
    state.step += 1
    bc1 = 1.0 - beta1**state.step
    bc2 = 1.0 - beta2**state.step
    for name, t in store:
        g = grads[name]
        if g.shape != t.shape:
            raise ValueError(f"gradient shape {g.shape} does not match {name} {t.shape}")
        m = state.m.get(name)
        v = state.v.get(name)
        if m is None:
            m = np.zeros_like(t.data)
            v = np.zeros_like(t.data)
        m = beta1 * m + (1 - beta1) * g
        v = beta2 * v + (1 - beta2) * g * g
        state.m[name], state.v[name] = m, v
        if lr:
            t.data = t.data - lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
    return store
