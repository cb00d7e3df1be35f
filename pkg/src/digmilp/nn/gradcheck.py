"""Central finite-difference checks of analytic gradients."""
from __future__ import annotations

import numpy as np

# elementwise relative error uses max(|analytic|, |numeric|, floor) as denominator
REL_FLOOR = 1e-6
# central differences carry rounding noise of about |f| * macheps / eps (~2e-11 |f| at
# eps=1e-5); a floor of |f| * LOSS_FLOOR keeps that noise well under 1e-4 relative
LOSS_FLOOR = 1e-6


def relative_error(analytic, numeric, floor=REL_FLOOR) -> float:
    analytic = np.asarray(analytic, dtype=np.float64).ravel()
    numeric = np.asarray(numeric, dtype=np.float64).ravel()
    if analytic.size == 0:
        return 0.0
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom))


def numeric_grad(f, x: np.ndarray, eps=1e-5) -> np.ndarray:
    """Central differences of scalar ``f()`` w.r.t. the array ``x`` (perturbed in place)."""
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gf = g.reshape(-1)
    for k in range(flat.size):
        old = flat[k]
        flat[k] = old + eps
        fp = f()
        flat[k] = old - eps
        fm = f()
        flat[k] = old
        gf[k] = (fp - fm) / (2 * eps)
    return g


def check_store(loss_fn, store, eps=1e-5) -> float:
    """Max relative error over every tensor in a ParamStore.

    ``loss_fn()`` must rebuild the graph from the current parameter values and
    return a scalar Tensor.
    """
    store.zero_grad()
    loss = loss_fn()
    loss.backward()
    floor = max(REL_FLOOR, LOSS_FLOOR * abs(loss.item()))
    worst = 0.0
    for name, t in store:
        analytic = np.zeros_like(t.data) if t.grad is None else t.grad.copy()
        numeric = numeric_grad(lambda: loss_fn().item(), t.data, eps)
        worst = max(worst, relative_error(analytic, numeric, floor))
    return worst
