"""Losses and the Gaussian latent helpers."""
from __future__ import annotations

import numpy as np

from ..exceptions import DimensionMismatch, ValidationError
from . import autograd as ag
from .autograd import Tensor, huber  # noqa: F401 - re-exported


def kl_std_normal(mu: Tensor, logvar: Tensor) -> Tensor:
    """KL(N(mu, exp(logvar)) || N(0, I)) summed over latent dims, averaged over rows."""
    if mu.shape != logvar.shape:
        raise DimensionMismatch(f"mu {mu.shape} vs logvar {logvar.shape}")
    if not (np.all(np.isfinite(mu.data)) and np.all(np.isfinite(logvar.data))):
        raise ValidationError("non-finite latent statistics")
    inner = ag.add(ag.add(ag.exp(logvar), ag.square(mu)), ag.add(ag.neg(logvar), -1.0))
    per_row = ag.sum(inner, axis=1)
    return ag.mul(ag.mean(per_row), 0.5)


def reparameterize(mu: Tensor, logvar: Tensor, noise) -> Tensor:
    """z = mu + exp(logvar / 2) * noise."""
    noise = np.asarray(noise, dtype=np.float64)
    if noise.shape != mu.shape or mu.shape != logvar.shape:
        raise DimensionMismatch("mu, logvar and noise must share a shape")
    return ag.add(mu, ag.mul(ag.exp(ag.mul(logvar, 0.5)), Tensor(noise)))
