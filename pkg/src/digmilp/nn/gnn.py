"""Bipartite graph convolution backbone over constraint and variable nodes.

Embedding MLPs per side, then one constraint-update half-convolution
(variables -> constraints) followed by one variable-update half-convolution
(constraints -> variables). Each message is

    msg(c, v) = W_f relu(W_l h_dst + w_cv * W_e + W_r h_src)

summed per destination and combined with the destination embedding by an
output MLP. No residual connections.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autograd as ag
from .autograd import Tensor
from .layers import MLP, Linear, ParamStore


@dataclass
class NodeEmbeddings:
    h_cons: Tensor
    h_vars: Tensor

    @property
    def hidden(self) -> int:
        return self.h_cons.shape[1]


@dataclass
class GraphInput:
    """Network-ready arrays: node features, edge endpoints and edge features."""

    cons: np.ndarray
    var: np.ndarray
    src_cons: np.ndarray
    dst_var: np.ndarray
    edge_w: np.ndarray

    @property
    def n_cons(self):
        return self.cons.shape[0]

    @property
    def n_vars(self):
        return self.var.shape[0]


class _HalfConv:
    def __init__(self, store, name, hidden):
        self.left = Linear(store, f"{name}.left", hidden, hidden)
        self.edge = store.add(f"{name}.edge", store.rng.uniform(-1, 1, size=(1, hidden)))
        self.right = Linear(store, f"{name}.right", hidden, hidden)
        self.final = Linear(store, f"{name}.final", hidden, hidden)
        self.out = MLP(store, f"{name}.out", [2 * hidden, hidden, hidden])

    def __call__(self, h_dst, h_src, dst_idx, src_idx, edge_w):
        n_dst = h_dst.shape[0]
        if len(dst_idx) == 0:
            agg = Tensor(np.zeros(h_dst.shape))
        else:
            pre = ag.add(
                ag.add(ag.take_rows(self.left(h_dst), dst_idx), ag.take_rows(self.right(h_src), src_idx)),
                ag.mul(Tensor(edge_w[:, None]), self.edge),
            )
            msg = self.final(ag.relu(pre))
            agg = ag.segment_sum(msg, dst_idx, n_dst)
        return self.out(ag.concat([agg, h_dst], axis=1))


class BipartiteGNN:
    def __init__(self, store: ParamStore, name: str, cons_dim: int, var_dim: int, hidden: int = 32):
        self.hidden = hidden
        self.cons_embed = MLP(store, f"{name}.cons_embed", [cons_dim, hidden, hidden], final_activation=True)
        self.var_embed = MLP(store, f"{name}.var_embed", [var_dim, hidden, hidden], final_activation=True)
        self.v_to_c = _HalfConv(store, f"{name}.v_to_c", hidden)
        self.c_to_v = _HalfConv(store, f"{name}.c_to_v", hidden)

    def __call__(self, g: GraphInput) -> NodeEmbeddings:
        if g.cons.shape[0] == 0:
            raise ValueError("graph has no constraint nodes")
        hc = self.cons_embed(Tensor(g.cons))
        hv = self.var_embed(Tensor(g.var))
        hc = self.v_to_c(hc, hv, g.src_cons, g.dst_var, g.edge_w)
        hv = self.c_to_v(hv, hc, g.dst_var, g.src_cons, g.edge_w)
        return NodeEmbeddings(hc, hv)


def gnn_forward(g: GraphInput, model: BipartiteGNN) -> NodeEmbeddings:
    return model(g)
