"""Optimal-objective regression on the bipartite graph of an instance."""
from __future__ import annotations

import logging

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from ..exceptions import LabelingFailure, ValidationError
from ..instance import MilpInstance, Status
from ..nn import MLP, AdamState, BipartiteGNN, GraphInput, ParamStore, adam_step, autograd as ag
from ..nn.checkpoint import load_checkpoint, save_checkpoint
from ..solver import SolverParams, solve_milp
from ..validation import check_instances

log = logging.getLogger(__name__)


def rel_mse(preds, truths) -> float:
    """mean((p - t)^2 / t^2), skipping rows with t == 0."""
    p = np.asarray(preds, dtype=np.float64)
    t = np.asarray(truths, dtype=np.float64)
    if p.shape != t.shape:
        raise ValidationError("predictions and truths differ in shape")
    keep = t != 0
    if not keep.all():
        log.warning("excluding %d rows with zero truth", int((~keep).sum()))
    if not keep.any():
        raise ValidationError("no rows with nonzero truth")
    return float(np.mean((p[keep] - t[keep]) ** 2 / t[keep] ** 2))


def optimal_values(instances, params: SolverParams | None = None) -> np.ndarray:
    params = params or SolverParams()
    out = []
    for inst in instances:
        rep = solve_milp(inst, params)
        if rep.limit_hit or rep.outcome is None or rep.outcome.status is not Status.OPTIMAL:
            raise LabelingFailure(f"{inst.name}: no proven optimum")
        out.append(rep.outcome.value)
    return np.array(out)


def _moments(x):
    x = np.asarray(x, dtype=np.float64)
    sd = float(x.std())
    mu = float(x.mean())
    return mu, sd if sd > 0 else max(abs(mu), 1.0)


class ObjectivePredictor(RegressorMixin, BaseEstimator):
    """GNN embeddings, mean-pooled per side, then an MLP regressing the optimum.

    Inputs: b and constraint degree on constraint nodes, c and variable degree
    on variable nodes, A's entries on edges, all standardized with training
    moments. The target is standardized too.
    """

    def __init__(self, hidden=32, epochs=100, batch_size=8, lr=1e-3, seed=0):
        self.hidden = hidden
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr = lr
        self.seed = seed

    def _build(self):
        self.store_ = ParamStore(np.random.default_rng(self.seed))
        self._gnn = BipartiteGNN(self.store_, "gnn", 2, 2, self.hidden)
        self._head = MLP(self.store_, "head", [2 * self.hidden, self.hidden, 1])

    def _input(self, inst: MilpInstance) -> GraphInput:
        st = self.norm_
        coo = inst.a.tocoo()
        m, n = inst.a.shape
        cdeg = np.diff(inst.a.indptr) / n
        vdeg = np.bincount(inst.a.indices, minlength=n) / m
        return GraphInput(
            cons=np.column_stack([(inst.b - st["b"][0]) / st["b"][1], cdeg]),
            var=np.column_stack([(inst.c - st["c"][0]) / st["c"][1], vdeg]),
            src_cons=coo.row.astype(np.int64),
            dst_var=coo.col.astype(np.int64),
            edge_w=(coo.data - st["w"][0]) / st["w"][1],
        )

    def _forward(self, gin: GraphInput):
        emb = self._gnn(gin)
        pooled = ag.concat([ag.mean(emb.h_cons, axis=0), ag.mean(emb.h_vars, axis=0)], axis=0)
        return self._head(ag.reshape(pooled, (1, -1)))

    def fit(self, X, y=None):
        instances = check_instances(X)
        y = optimal_values(instances) if y is None else np.asarray(y, dtype=np.float64)
        if y.shape != (len(instances),):
            raise ValidationError("need exactly one target per instance")
        if not np.all(np.isfinite(y)):
            raise ValidationError("targets must be finite")
        self.norm_ = {
            "b": _moments(np.concatenate([i.b for i in instances])),
            "c": _moments(np.concatenate([i.c for i in instances])),
            "w": _moments(np.concatenate([i.a.data for i in instances])),
            "y": _moments(y),
        }
        self._build()
        inputs = [self._input(i) for i in instances]
        target = (y - self.norm_["y"][0]) / self.norm_["y"][1]
        rng = np.random.default_rng(self.seed)
        state = AdamState()
        self.loss_trace_ = []
        for _ in range(self.epochs):
            order = rng.permutation(len(inputs))
            losses = []
            for start in range(0, len(order), self.batch_size):
                batch = order[start : start + self.batch_size]
                self.store_.zero_grad()
                preds = ag.concat([self._forward(inputs[k]) for k in batch], axis=0)
                loss = ag.mean(ag.square(ag.add(preds, ag.Tensor(-target[batch][:, None]))))
                loss.backward()
                adam_step(self.store_, self.store_.grads(), state, self.lr)
                losses.append(loss.item())
            self.loss_trace_.append(float(np.mean(losses)))
        return self

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "store_")
        instances = check_instances(X)
        mu, sd = self.norm_["y"]
        return np.array([self._forward(self._input(i)).data.item() * sd + mu for i in instances])

    def save(self, path):
        check_is_fitted(self, "store_")
        meta = {"kind": "objective-predictor", "params": self.get_params(),
                "norm": {k: list(v) for k, v in self.norm_.items()}}
        save_checkpoint(path, {k: t.data for k, t in self.store_}, meta)

    @classmethod
    def load(cls, path) -> "ObjectivePredictor":
        tensors, meta = load_checkpoint(path)
        if meta.get("kind") != "objective-predictor":
            raise ValidationError(f"{path}: not an objective-predictor checkpoint")
        est = cls(**meta["params"])
        est.norm_ = {k: tuple(v) for k, v in meta["norm"].items()}
        est._build()
        for k, t in est.store_:
            t.data = np.asarray(tensors[k], dtype=np.float64).reshape(t.shape)
        est.loss_trace_ = []
        return est
