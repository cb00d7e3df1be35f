"""Comparison generators: Bowly-style from-scratch sampling and a random decoder."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .exceptions import ValidationError
from .graph import FeatureScaler, VCGraph, encode_graph
from .instance import FTuple, MilpInstance, Mode
from .validation import check_instances
from .vae import DecoderOutput, InferConfig, label_dataset, sample_instances


@dataclass(frozen=True)
class BowlyConfig:
    n: int
    m: int
    rho: float
    mu_a: float = 1.0
    sigma_a: float = 0.0
    p_v: Optional[float] = None  # None: drawn from U[0, 1] per matrix
    p_c: Optional[float] = None

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise ValidationError("Bowly needs n >= 1 and m >= 1")
        if not 0 < self.rho <= 1:
            raise ValidationError("rho must lie in (0, 1]")
        if self.sigma_a < 0:
            raise ValidationError("sigma_a must be >= 0")
        for p in (self.p_v, self.p_c):
            if p is not None and not 0 <= p <= 1:
                raise ValidationError("p_v and p_c must lie in [0, 1]")


# per-family settings; callables draw the value per matrix
BOWLY_PRESETS = {
    "sc": dict(rho=lambda rng: float(rng.choice([0.15, 0.20, 0.25, 0.30, 0.35])), mu_a=-1.0, sigma_a=0.0),
    "ca": dict(rho=0.05, mu_a=1.0, sigma_a=lambda rng: float(rng.uniform(0.1, 0.3))),
}


def bowly_matrix(cfg: BowlyConfig, rng) -> sp.csr_matrix:
    """Constraint matrix (m x n) from degree-pressure accumulation plus Bernoulli edges."""
    n, m = cfg.n, cfg.m
    p_v = rng.uniform() if cfg.p_v is None else cfg.p_v
    p_c = rng.uniform() if cfg.p_c is None else cfg.p_c
    d_var = np.zeros(n)
    d_var[rng.integers(n)] = 1.0
    d_con = np.zeros(m)
    d_con[rng.integers(m)] = 1.0
    e = 1
    target = cfg.rho * m * n
    while e < target:
        s = rng.uniform(size=n)
        t = rng.uniform(size=m)
        d_var[np.argmax(p_v * d_var / e + s)] += 1
        d_con[np.argmax(p_c * d_con / e + t)] += 1
        e += 1
    r = rng.uniform(size=(n, m))
    mask = (r < np.outer(d_var, d_con) / e).T  # rows: constraints
    deg_v = mask.sum(axis=0)
    deg_c = mask.sum(axis=1)
    while deg_v.min() == 0 or deg_c.min() == 0:
        zv = np.flatnonzero(deg_v == 0)
        zc = np.flatnonzero(deg_c == 0)
        i = int(zv[0]) if zv.size else int(rng.integers(n))
        j = int(zc[0]) if zc.size else int(rng.integers(m))
        mask[j, i] = True
        deg_v = mask.sum(axis=0)
        deg_c = mask.sum(axis=1)
    rows, cols = np.nonzero(mask)
    w = rng.normal(cfg.mu_a, cfg.sigma_a, size=rows.size) if cfg.sigma_a > 0 else np.full(rows.size, cfg.mu_a)
    w[w == 0] = cfg.mu_a if cfg.mu_a != 0 else 1e-6
    return sp.csr_matrix((w, (rows, cols)), shape=(m, n))


def sample_labels(a, ranges: FeatureScaler, mode: Mode, rng) -> FTuple:
    """x, y, s, r (and y2) uniform within the corpus ranges; x rounded to integers."""
    m, n = a.shape

    def draw(name, size):
        lo, hi = ranges.span(name)
        return rng.uniform(lo, hi, size=size) if hi > lo else np.full(size, lo)

    xlo, xhi = ranges.span("x")
    xlo, xhi = max(0, int(np.ceil(xlo))), int(np.floor(xhi))
    x = rng.integers(xlo, max(xlo, xhi) + 1, size=n).astype(np.float64)
    if mode is Mode.BINARY:
        x = np.clip(x, 0, 1)
    y = np.maximum(draw("y", m), 0.0)
    s = np.maximum(draw("s", n), 0.0)
    r = np.maximum(draw("r", m), 0.0)
    y2 = np.maximum(draw("y2", n), 0.0) if mode is Mode.BINARY else None
    return FTuple(a, x, y, s, r, mode, y2)


def bowly_instance(cfg: BowlyConfig, ranges: FeatureScaler, rng, mode=Mode.BINARY, name="bowly") -> MilpInstance:
    return sample_labels(bowly_matrix(cfg, rng), ranges, Mode(mode), rng).to_instance(name)


def random_decode(cg, rng) -> DecoderOutput:
    """Every head drawn uniformly over its scaled corpus range [0, 1]."""
    m, n = cg.base.n_cons + 1, cg.base.n_vars
    binary = cg.base.mode is Mode.BINARY
    return DecoderOutput(
        degree_hat=float(rng.uniform()),
        edge_logits=rng.uniform(size=n),
        weight_hat=rng.uniform(size=n),
        x_hat=rng.uniform(size=n),
        s_hat=rng.uniform(size=n),
        y_hat=rng.uniform(size=m),
        r_hat=rng.uniform(size=m),
        y2_hat=rng.uniform(size=n) if binary else None,
    )


def random_decoder_sample(graphs, gamma, ranges: FeatureScaler, seed=0, count=1, return_graphs=False):
    return sample_instances(graphs, random_decode, ranges, InferConfig(gamma, count, seed), return_graphs)


class _CorpusFitted(BaseEstimator):
    def _fit_corpus(self, X, y=None):
        instances = check_instances(X)
        labels = label_dataset(instances, y)
        self.graphs_ = [encode_graph(t) for t in labels]
        self.scaler_ = FeatureScaler().fit(self.graphs_)
        self.mode_ = instances[0].mode
        self.shape_ = (instances[0].n_cons, instances[0].n_vars)
        return self


class RandomDecoderGenerator(_CorpusFitted):
    """Same rewrite-and-assemble pipeline as the trained model, with uniform head outputs."""

    def __init__(self, seed=0):
        self.seed = seed

    def fit(self, X, y=None):
        return self._fit_corpus(X, y)

    def sample(self, n_samples=1, gamma=0.1, seed=None, dataset=None, return_graphs=False):
        check_is_fitted(self, "graphs_")
        graphs = self.graphs_ if dataset is None else [g if isinstance(g, VCGraph) else encode_graph(g) for g in dataset]
        return random_decoder_sample(graphs, gamma, self.scaler_, self.seed if seed is None else seed, n_samples, return_graphs)


class BowlyGenerator(_CorpusFitted):
    """From-scratch sampler: Bowly matrix plus uniformly drawn solution/slack labels.

    ``family`` picks density/weight presets ("sc", "ca"); explicit ``rho``,
    ``mu_a``, ``sigma_a`` override them.
    """

    def __init__(self, family="sc", rho=None, mu_a=None, sigma_a=None, seed=0):
        self.family = family
        self.rho = rho
        self.mu_a = mu_a
        self.sigma_a = sigma_a
        self.seed = seed

    def fit(self, X, y=None):
        if self.family not in BOWLY_PRESETS and None in (self.rho, self.mu_a, self.sigma_a):
            raise ValidationError(f"no Bowly preset for {self.family!r}; give rho, mu_a and sigma_a")
        return self._fit_corpus(X, y)

    def config(self, rng) -> BowlyConfig:
        preset = BOWLY_PRESETS.get(self.family, {})
        vals = {}
        for key in ("rho", "mu_a", "sigma_a"):
            v = getattr(self, key)
            if v is None:
                v = preset[key]
            vals[key] = v(rng) if callable(v) else float(v)
        m, n = self.shape_
        return BowlyConfig(n=n, m=m, **vals)

    def sample(self, n_samples=1, seed=None):
        check_is_fitted(self, "graphs_")
        seed = self.seed if seed is None else seed
        out = []
        for k in range(n_samples):
            rng = np.random.default_rng([int(seed), k])
            out.append(bowly_instance(self.config(rng), self.scaler_, rng, self.mode_, f"bowly-{k}"))
        return out
