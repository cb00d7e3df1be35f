"""Synthetic set-cover (SC) and combinatorial-auction (CA) instance families."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
import scipy.sparse as sp

from .exceptions import ConfigInfeasible, ValidationError
from .instance import MilpInstance, Mode, canonicalize


@dataclass(frozen=True)
class ScConfig:
    n_cons: int = 200
    n_vars: int = 400
    density: float = 0.25
    cost_range: tuple = (1, 100)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "cost_range", tuple(int(v) for v in self.cost_range))
        if self.n_cons < 1 or self.n_vars < 2:
            raise ValidationError("set cover needs n_cons >= 1 and n_vars >= 2")
        if not 0 < self.density < 1:
            raise ValidationError("density must lie in (0, 1)")
        lo, hi = self.cost_range
        if lo < 1 or hi < lo:
            raise ValidationError("cost_range must satisfy 1 <= min <= max")
        if self.density * self.n_vars < 2:
            raise ConfigInfeasible(
                f"density {self.density} leaves fewer than 2 columns per row (n_vars={self.n_vars})"
            )

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class CaConfig:
    n_items: int = 100
    n_bids: int = 300
    max_bundle: int = 5
    price_range: tuple = (1, 100)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "price_range", tuple(float(v) for v in self.price_range))
        if self.n_items < 1 or self.n_bids < 1:
            raise ValidationError("need n_items >= 1 and n_bids >= 1")
        if not 1 <= self.max_bundle <= self.n_items:
            raise ValidationError("max_bundle must lie in [1, n_items]")
        lo, hi = self.price_range
        if lo <= 0 or hi < lo:
            raise ValidationError("price_range must satisfy 0 < min <= max")

    def to_dict(self):
        return asdict(self)


def set_cover_matrix(n_cons, n_vars, density, rng) -> sp.csr_matrix:
    """0/1 cover matrix: every row has >= 2 ones, every column >= 1, about
    ``density * n_cons * n_vars`` ones in total."""
    target = int(round(density * n_cons * n_vars))
    if target < max(2 * n_cons, n_vars):
        raise ConfigInfeasible(
            f"{target} nonzeros cannot give every row 2 and every column 1 entry"
        )
    mask = np.zeros((n_cons, n_vars), dtype=bool)
    # every column appears in some row; balanced so the top-up below adds as few as possible
    mask[rng.permutation(np.arange(n_vars) % n_cons), np.arange(n_vars)] = True
    # every row has at least two columns
    for i in range(n_cons):
        short = 2 - int(mask[i].sum())
        if short > 0:
            free = np.flatnonzero(~mask[i])
            mask[i, rng.choice(free, size=short, replace=False)] = True
    remaining = target - int(mask.sum())
    if remaining > 0:
        free = np.flatnonzero(~mask.ravel())
        pick = rng.choice(free, size=remaining, replace=False)
        mask.ravel()[pick] = True
    return sp.csr_matrix(mask.astype(np.float64))


def gen_set_cover(cfg: ScConfig, name: str | None = None) -> MilpInstance:
    """min cost^T x s.t. M x >= 1, x binary, stored as max -cost^T x s.t. -M x <= -1."""
    rng = np.random.default_rng(cfg.seed)
    m = set_cover_matrix(cfg.n_cons, cfg.n_vars, cfg.density, rng)
    lo, hi = cfg.cost_range
    cost = rng.integers(lo, hi + 1, size=cfg.n_vars).astype(np.float64)
    return canonicalize(
        m, np.ones(cfg.n_cons), cost, sense="min", row_sense=[">="] * cfg.n_cons,
        mode=Mode.BINARY, name=name or f"sc-{cfg.seed}",
    )


def comb_auction_from_bids(n_items, bundles, prices, name="ca") -> MilpInstance:
    """Set packing: max sum price_j x_j s.t. each item is sold at most once.

    Items that appear in no bundle give empty rows and are dropped.
    """
    rows, cols = [], []
    for j, bundle in enumerate(bundles):
        for item in bundle:
            rows.append(item)
            cols.append(j)
    a = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n_items, len(bundles)))
    used = np.diff(a.indptr) > 0
    a = a[used]
    return MilpInstance(a, np.ones(a.shape[0]), np.asarray(prices, dtype=np.float64), Mode.BINARY, name)


def gen_comb_auction(cfg: CaConfig, name: str | None = None) -> MilpInstance:
    rng = np.random.default_rng(cfg.seed)
    sizes = rng.integers(1, cfg.max_bundle + 1, size=cfg.n_bids)
    bundles = [rng.choice(cfg.n_items, size=k, replace=False) for k in sizes]
    lo, hi = cfg.price_range
    prices = np.round(rng.uniform(lo, hi, size=cfg.n_bids))
    prices = np.maximum(prices, 1.0)
    return comb_auction_from_bids(cfg.n_items, bundles, prices, name or f"ca-{cfg.seed}")


def generate_family(family: str, count: int, seed: int = 0, **cfg_kwargs) -> list[MilpInstance]:
    """``count`` instances with seeds ``seed, seed+1, ...``."""
    if family == "sc":
        return [gen_set_cover(ScConfig(seed=seed + k, **cfg_kwargs), name=f"sc-{seed + k}") for k in range(count)]
    if family == "ca":
        return [gen_comb_auction(CaConfig(seed=seed + k, **cfg_kwargs), name=f"ca-{seed + k}") for k in range(count)]
    raise ValidationError(f"unknown family {family!r} (expected 'sc' or 'ca')")
