"""Variable-constraint bipartite graphs, the corruption operator and feature scaling."""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import EmptyCorpus, LastConstraint, NegativeFeature, ValidationError
from .instance import TOL, FTuple, MilpInstance, Mode, derive_bc

# feature column layout
CONS_COLUMNS = ("indicator", "y", "r")
VAR_COLUMNS = {Mode.GENERAL: ("indicator", "x", "s"), Mode.BINARY: ("indicator", "x", "s", "y2")}


@dataclass(frozen=True, eq=False)
class VCGraph:
    cons_feats: np.ndarray  # (n_cons, 3): 0, y, r
    var_feats: np.ndarray  # (n_vars, 3|4): 1, x, s[, y2]
    edges: np.ndarray  # (E, 2) int: (cons_idx, var_idx), row-major order
    weights: np.ndarray  # (E,)
    mode: Mode = Mode.GENERAL

    @property
    def n_cons(self) -> int:
        return self.cons_feats.shape[0]

    @property
    def n_vars(self) -> int:
        return self.var_feats.shape[0]

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]

    def column(self, name: str) -> np.ndarray:
        if name in ("y", "r"):
            return self.cons_feats[:, CONS_COLUMNS.index(name)]
        return self.var_feats[:, VAR_COLUMNS[self.mode].index(name)]

    def matrix(self) -> sp.csr_matrix:
        return sp.csr_matrix(
            (self.weights, (self.edges[:, 0], self.edges[:, 1])), shape=(self.n_cons, self.n_vars)
        )

    def cons_degrees(self) -> np.ndarray:
        return np.bincount(self.edges[:, 0], minlength=self.n_cons)

    def var_degrees(self) -> np.ndarray:
        return np.bincount(self.edges[:, 1], minlength=self.n_vars)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode.value,
            "cons_columns": list(CONS_COLUMNS),
            "var_columns": list(VAR_COLUMNS[self.mode]),
            "cons_feats": self.cons_feats.tolist(),
            "var_feats": self.var_feats.tolist(),
            "edges": [[int(i), int(j), float(w)] for (i, j), w in zip(self.edges, self.weights)],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict())


@dataclass(frozen=True, eq=False)
class CorruptedGraph:
    """A graph with one constraint node removed and every x/y/s/r feature erased."""

    base: VCGraph
    removed_index: int
    removed_vars: np.ndarray
    removed_weights: np.ndarray
    original: VCGraph | None = field(default=None, repr=False)

    @property
    def removed_degree(self) -> int:
        return int(self.removed_vars.size)


def encode_graph(t: FTuple) -> VCGraph:
    a = t.a.tocoo()
    order = np.lexsort((a.col, a.row))
    edges = np.stack([a.row[order], a.col[order]], axis=1).astype(np.int64)
    cons = np.column_stack([np.zeros(t.n_cons), t.y, t.r])
    cols = [np.ones(t.n_vars), t.x, t.s]
    if t.mode is Mode.BINARY:
        cols.append(t.y2)
    return VCGraph(cons, np.column_stack(cols), edges, a.data[order].astype(np.float64), t.mode)


def _nonneg(v, name, tol):
    if v.size and v.min() < -tol:
        raise NegativeFeature(f"{name} feature {v.min():.3e} is negative")
    return np.maximum(v, 0.0)


def decode_tuple(g: VCGraph, tol: float = TOL) -> FTuple:
    y = _nonneg(g.column("y"), "y", tol)
    r = _nonneg(g.column("r"), "r", tol)
    x = _nonneg(g.column("x"), "x", tol)
    s = _nonneg(g.column("s"), "s", tol)
    y2 = _nonneg(g.column("y2"), "y2", tol) if g.mode is Mode.BINARY else None
    return FTuple(g.matrix(), x, y, s, r, g.mode, y2)


def decode_instance(g: VCGraph, name: str = "instance", tol: float = TOL) -> tuple[FTuple, MilpInstance]:
    t = decode_tuple(g, tol)
    b, c = derive_bc(t)
    return t, MilpInstance(t.a, b, c, t.mode, name)


def erase(g: VCGraph) -> VCGraph:
    cons = np.zeros_like(g.cons_feats)
    var = np.zeros_like(g.var_feats)
    var[:, 0] = 1.0
    return VCGraph(cons, var, g.edges, g.weights, g.mode)


def corrupt(g: VCGraph, cons_idx: int | None = None, rng=None) -> CorruptedGraph:
    """Remove one constraint node (uniform when ``cons_idx`` is None) and erase features."""
    if g.n_cons < 2:
        raise LastConstraint("cannot remove the only constraint")
    if cons_idx is None:
        rng = rng if rng is not None else np.random.default_rng()
        cons_idx = int(rng.integers(g.n_cons))
    if not 0 <= cons_idx < g.n_cons:
        raise ValidationError(f"constraint index {cons_idx} out of range")
    hit = g.edges[:, 0] == cons_idx
    keep_edges = g.edges[~hit].copy()
    keep_edges[keep_edges[:, 0] > cons_idx, 0] -= 1
    keep_cons = np.delete(g.cons_feats, cons_idx, axis=0)
    base = erase(VCGraph(keep_cons, g.var_feats, keep_edges, g.weights[~hit].copy(), g.mode))
    return CorruptedGraph(base, cons_idx, g.edges[hit, 1].copy(), g.weights[hit].copy(), g)


# ---------------------------------------------------------------------------
# scaling

SCALED_FEATURES = ("y", "r", "x", "s", "y2", "weight", "degree")


def _feature_values(g: VCGraph, name: str) -> np.ndarray:
    if name == "weight":
        return g.weights
    if name == "degree":
        return g.cons_degrees().astype(np.float64)
    if name == "y2" and g.mode is not Mode.BINARY:
        return np.empty(0)
    return g.column(name)


class FeatureScaler(TransformerMixin, BaseEstimator):
    """Per-feature min-max scaling fitted on a training corpus of graphs.

    A feature that is constant over the corpus maps to 0 and inverts to the
    constant.
    """

    def fit(self, X, y=None):
        graphs = list(X)
        if not graphs:
            raise EmptyCorpus("cannot fit a scaler on an empty corpus")
        self.min_, self.max_ = {}, {}
        for name in SCALED_FEATURES:
            vals = np.concatenate([_feature_values(g, name) for g in graphs])
            if vals.size == 0:
                continue
            self.min_[name] = float(vals.min())
            self.max_[name] = float(vals.max())
        self.mode_ = graphs[0].mode
        return self

    def span(self, name):
        check_is_fitted(self, "min_")
        return self.min_[name], self.max_[name]

    def scale(self, name, values):
        lo, hi = self.span(name)
        values = np.asarray(values, dtype=np.float64)
        if hi == lo:
            return np.zeros_like(values)
        return (values - lo) / (hi - lo)

    def unscale(self, name, values):
        lo, hi = self.span(name)
        values = np.asarray(values, dtype=np.float64)
        if hi == lo:
            return np.full_like(values, lo)
        return values * (hi - lo) + lo

    def transform(self, X):
        return [self._transform_one(g) for g in X]

    def inverse_transform(self, X):
        return [self._transform_one(g, inverse=True) for g in X]

    def _transform_one(self, g: VCGraph, inverse=False) -> VCGraph:
        f = self.unscale if inverse else self.scale
        cons = g.cons_feats.copy()
        var = g.var_feats.copy()
        for k, name in enumerate(CONS_COLUMNS[1:], start=1):
            cons[:, k] = f(name, cons[:, k])
        for k, name in enumerate(VAR_COLUMNS[g.mode][1:], start=1):
            var[:, k] = f(name, var[:, k])
        return replace(g, cons_feats=cons, var_feats=var, weights=f("weight", g.weights))

    def to_dict(self):
        check_is_fitted(self, "min_")
        return {"mode": self.mode_.value, "min": self.min_, "max": self.max_}

    @classmethod
    def from_dict(cls, d):
        sc = cls()
        sc.min_ = {k: float(v) for k, v in d["min"].items()}
        sc.max_ = {k: float(v) for k, v in d["max"].items()}
        sc.mode_ = Mode(d["mode"])
        return sc
