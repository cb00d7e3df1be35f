"""Constraint-rewriting graph VAE.

Training removes one constraint node from a labeled graph, erases every
solution/slack feature and learns to reconstruct the removed row plus all
of x, y, s, r. Sampling repeats remove-and-rebuild on an existing instance;
because the rebuilt graph is assembled from nonnegative (y, s, r) and
nonnegative integral x, the instance it encodes is always feasible and
bounded whatever the network outputs.
"""
from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .exceptions import AssemblyFailure, LastConstraint, ValidationError
from .graph import (
    CorruptedGraph,
    FeatureScaler,
    VCGraph,
    corrupt,
    encode_graph,
)
from .instance import FTuple, MilpInstance, Mode, derive_bc
from .nn import autograd as ag
from .nn.autograd import Tensor, huber
from .nn.checkpoint import load_checkpoint, save_checkpoint
from .nn.functional import kl_std_normal, reparameterize
from .nn.gnn import BipartiteGNN, GraphInput
from .nn.layers import MLP, ParamStore
from .nn.optim import AdamState, adam_step
from .validation import check_instances

log = logging.getLogger(__name__)

MAX_ASSEMBLY_RETRIES = 8
DEFAULT_ALPHA = {"sc": 5.0, "ca": 150.0}

VAR_HEADS = ("edge", "weight", "x", "s")
CONS_HEADS = ("y", "r")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    batch_size: int = 8
    alpha: float = 5.0
    lr: float = 1e-3
    seed: int = 123
    latent_dim: int = 8
    hidden_dim: int = 32
    huber_delta: float = 1.0

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValidationError("alpha must be positive")
        if self.epochs < 0 or self.batch_size < 1:
            raise ValidationError("epochs must be >= 0 and batch_size >= 1")
        if self.latent_dim < 1 or self.hidden_dim < 1:
            raise ValidationError("latent_dim and hidden_dim must be >= 1")
        if self.lr < 0:
            raise ValidationError("lr must be >= 0")


@dataclass(frozen=True)
class InferConfig:
    gamma: float = 0.1
    count: int = 1
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.gamma <= 1:
            raise ValidationError("gamma (constraint replace rate) must lie in (0, 1]")
        if self.count < 0:
            raise ValidationError("count must be >= 0")

    def iterations(self, n_cons: int) -> int:
        return max(1, math.ceil(self.gamma * n_cons - 1e-12))


@dataclass
class EncoderOutput:
    mu: Tensor
    logvar: Tensor

    @property
    def latent_dim(self):
        return self.mu.shape[1]


@dataclass
class DecoderOutput:
    """Head predictions in scaled units. Tensors during training, arrays otherwise."""

    degree_hat: object
    edge_logits: object
    weight_hat: object
    x_hat: object
    s_hat: object
    y_hat: object
    r_hat: object
    y2_hat: object = None

    def numpy(self) -> "DecoderOutput":
        conv = lambda v: None if v is None else np.asarray(v.data if isinstance(v, Tensor) else v, dtype=np.float64).reshape(-1)
        out = DecoderOutput(*(conv(getattr(self, k)) for k in self.__dataclass_fields__))
        out.degree_hat = float(out.degree_hat[0])
        return out


# ---------------------------------------------------------------------------
# network inputs


def graph_input(g: VCGraph, scaler: FeatureScaler, erased: bool) -> GraphInput:
    """Scaled node features with a trailing presence column (0 when erased)."""
    if erased:
        cons = np.zeros((g.n_cons, g.cons_feats.shape[1] + 1))
        var = np.zeros((g.n_vars, g.var_feats.shape[1] + 1))
        var[:, 0] = 1.0
    else:
        sg = scaler.transform([g])[0]
        cons = np.column_stack([sg.cons_feats, np.ones(g.n_cons)])
        var = np.column_stack([sg.var_feats, np.ones(g.n_vars)])
        cons[:, 0] = 0.0
        var[:, 0] = 1.0
    return GraphInput(cons, var, g.edges[:, 0], g.edges[:, 1], scaler.scale("weight", g.weights))


class DigMilpNet:
    """Encoder (phi) and decoder (theta) parameters plus their forward passes."""

    def __init__(self, mode: Mode, hidden: int = 32, latent: int = 8, seed: int = 123):
        self.mode = Mode(mode)
        self.hidden, self.latent = hidden, latent
        self.store = ParamStore(np.random.default_rng(seed))
        s = self.store
        cons_dim = 4
        var_dim = 5 if self.mode is Mode.BINARY else 4
        self.encoder = BipartiteGNN(s, "enc", cons_dim, var_dim, hidden)
        self.mu_head = MLP(s, "enc.mu", [hidden, hidden, latent])
        self.logvar_head = MLP(s, "enc.logvar", [hidden, hidden, latent])
        self.decoder = BipartiteGNN(s, "dec", cons_dim, var_dim, hidden)
        width = hidden + latent
        names = ["degree", *VAR_HEADS, *CONS_HEADS] + (["y2"] if self.mode is Mode.BINARY else [])
        self.heads = {k: MLP(s, f"dec.{k}", [width, hidden, 1]) for k in names}

    def encode_latent(self, gin: GraphInput) -> EncoderOutput:
        emb = self.encoder(gin)
        h = ag.concat([emb.h_cons, emb.h_vars], axis=0)
        return EncoderOutput(self.mu_head(h), self.logvar_head(h))

    def decode_heads(self, gin: GraphInput, removed_index: int, z: Tensor) -> DecoderOutput:
        """Heads over the corrupted graph. ``z`` has one row per node of the
        full graph: constraints (including the removed one) then variables."""
        m_left, n = gin.n_cons, gin.n_vars
        m = m_left + 1
        z = z if isinstance(z, Tensor) else Tensor(z)
        if z.shape[0] != m + n:
            raise ValidationError(f"latent has {z.shape[0]} rows, graph needs {m + n}")
        emb = self.decoder(gin)
        surviving = np.delete(np.arange(m), removed_index)
        z_c = ag.take_rows(z, surviving)
        z_new = ag.take_rows(z, [removed_index])
        z_v = ag.take_rows(z, m + np.arange(n))
        hv_in = ag.concat([emb.h_vars, z_v], axis=1)
        hc_in = ag.concat([emb.h_cons, z_c], axis=1)
        pooled = ag.reshape(ag.mean(emb.h_vars, axis=0), (1, self.hidden))
        new_in = ag.concat([pooled, z_new], axis=1)
        cons_rows = ag.concat([hc_in, new_in], axis=0)
        # graph order: surviving rows keep their order, the new row sits at removed_index
        perm = np.empty(m, dtype=np.int64)
        perm[surviving] = np.arange(m_left)
        perm[removed_index] = m_left
        col = lambda t: ag.reshape(t, (t.shape[0],))
        return DecoderOutput(
            degree_hat=col(self.heads["degree"](new_in)),
            edge_logits=col(self.heads["edge"](hv_in)),
            weight_hat=col(self.heads["weight"](hv_in)),
            x_hat=col(self.heads["x"](hv_in)),
            s_hat=col(self.heads["s"](hv_in)),
            y_hat=col(ag.take_rows(self.heads["y"](cons_rows), perm)),
            r_hat=col(ag.take_rows(self.heads["r"](cons_rows), perm)),
            y2_hat=col(self.heads["y2"](hv_in)) if self.mode is Mode.BINARY else None,
        )


# ---------------------------------------------------------------------------
# loss


def reconstruction_targets(cg: CorruptedGraph, scaler: FeatureScaler) -> dict:
    g = cg.original
    edge = np.zeros(g.n_vars)
    edge[cg.removed_vars] = 1.0
    t = {
        "degree": np.array([float(scaler.scale("degree", cg.removed_degree))]),
        "edge": edge,
        "weight": scaler.scale("weight", cg.removed_weights),
        "x": scaler.scale("x", g.column("x")),
        "s": scaler.scale("s", g.column("s")),
        "y": scaler.scale("y", g.column("y")),
        "r": scaler.scale("r", g.column("r")),
    }
    if g.mode is Mode.BINARY:
        t["y2"] = scaler.scale("y2", g.column("y2"))
    return t


_HEAD_FIELDS = {
    "degree": "degree_hat", "edge": "edge_logits", "weight": "weight_hat", "x": "x_hat",
    "s": "s_hat", "y": "y_hat", "r": "r_hat", "y2": "y2_hat",
}


def reconstruction_loss(out: DecoderOutput, targets: dict, removed_vars, delta=1.0) -> Tensor:
    """Sum over heads of the mean Huber loss; weights only count on true edges."""
    terms = []
    for key, target in targets.items():
        pred = getattr(out, _HEAD_FIELDS[key])
        if key == "weight":
            if len(removed_vars) == 0:
                continue
            pred = ag.take_rows(pred, removed_vars)
        terms.append(huber(pred, target, delta))
    total = terms[0]
    for t in terms[1:]:
        total = ag.add(total, t)
    return total


def elbo_loss(net: DigMilpNet, g: VCGraph, scaler: FeatureScaler, alpha: float, rng, delta=1.0, cons_idx=None):
    """alpha * reconstruction + KL for one graph with a fresh corruption.

    Returns ``(loss, parts)`` where ``parts`` holds float ``recon`` (unweighted),
    ``weighted_recon`` and ``kl``. Call ``loss.backward()`` for gradients of
    both encoder and decoder parameters.
    """
    if g.n_cons < 2:
        raise LastConstraint("ELBO needs at least two constraints")
    if cons_idx is None:
        cons_idx = int(rng.integers(g.n_cons))
    cg = corrupt(g, cons_idx)
    enc = net.encode_latent(graph_input(g, scaler, erased=False))
    noise = rng.standard_normal(enc.mu.shape)
    z = reparameterize(enc.mu, enc.logvar, noise)
    out = net.decode_heads(graph_input(cg.base, scaler, erased=True), cg.removed_index, z)
    recon = reconstruction_loss(out, reconstruction_targets(cg, scaler), cg.removed_vars, delta)
    kl = kl_std_normal(enc.mu, enc.logvar)
    weighted = ag.mul(recon, float(alpha))
    loss = ag.add(weighted, kl)
    parts = {"recon": recon.item(), "weighted_recon": weighted.item(), "kl": kl.item(), "loss": loss.item()}
    return loss, parts


# ---------------------------------------------------------------------------
# assembly


def assemble_instance(cg: CorruptedGraph, out: DecoderOutput, scaler: FeatureScaler, name="instance"):
    """Turn head outputs into a graph and instance that are feasible-bounded by construction."""
    out = out.numpy() if isinstance(out.x_hat, Tensor) else out
    base = cg.base
    m, n = base.n_cons + 1, base.n_vars
    arrays = [out.edge_logits, out.weight_hat, out.x_hat, out.s_hat, out.y_hat, out.r_hat]
    if base.mode is Mode.BINARY:
        arrays.append(out.y2_hat)
    if not np.isfinite(out.degree_hat) or not all(np.all(np.isfinite(a)) for a in arrays):
        raise AssemblyFailure("decoder produced non-finite outputs")
    if out.edge_logits.shape != (n,) or out.y_hat.shape != (m,) or out.r_hat.shape != (m,):
        raise AssemblyFailure("decoder output shapes do not match the corrupted graph")

    d = int(np.clip(np.round(float(scaler.unscale("degree", out.degree_hat))), 1, n))
    chosen = np.sort(np.argsort(-out.edge_logits, kind="stable")[:d])
    weights = scaler.unscale("weight", out.weight_hat[chosen])
    nz = np.abs(weights) > 1e-12
    chosen, weights = chosen[nz], weights[nz]
    if chosen.size == 0:
        raise AssemblyFailure("new constraint has no nonzero coefficients")

    cap = 1.0 if base.mode is Mode.BINARY else np.inf
    x = np.clip(np.round(scaler.unscale("x", out.x_hat)), 0.0, cap)
    s = np.maximum(scaler.unscale("s", out.s_hat), 0.0)
    y = np.maximum(scaler.unscale("y", out.y_hat), 0.0)
    r = np.maximum(scaler.unscale("r", out.r_hat), 0.0)
    y2 = np.maximum(scaler.unscale("y2", out.y2_hat), 0.0) if base.mode is Mode.BINARY else None

    a_left = base.matrix()
    i = cg.removed_index
    new_row = sp.csr_matrix((weights, (np.zeros(chosen.size, dtype=np.int64), chosen)), shape=(1, n))
    a = sp.vstack([a_left[:i], new_row, a_left[i:]], format="csr")
    t = FTuple(a, x, y, s, r, base.mode, y2)
    b, c = derive_bc(t)
    return encode_graph(t), MilpInstance(t.a, b, c, t.mode, name)


def sample_from_graph(g: VCGraph, decode, scaler, iterations, rng, name="sample"):
    """Run ``iterations`` remove-and-rebuild steps starting from ``g``.

    ``decode(cg, rng)`` returns a DecoderOutput for a corrupted graph.
    """
    inst = None
    for _ in range(iterations):
        for attempt in range(MAX_ASSEMBLY_RETRIES + 1):
            cg = corrupt(g, rng=rng)
            try:
                g_new, inst = assemble_instance(cg, decode(cg, rng), scaler, name)
                break
            except AssemblyFailure:
                if attempt == MAX_ASSEMBLY_RETRIES:
                    raise
        g = g_new
    return g, inst


def rng_for(seed: int, index: int):
    return np.random.default_rng([int(seed), int(index)])


# ---------------------------------------------------------------------------
# estimator


def label_dataset(instances, labels=None, params=None):
    """Labels for each instance, solving where none are supplied."""
    from .solver import extract_labels

    labels = list(labels) if labels is not None else [None] * len(instances)
    if len(labels) != len(instances):
        raise ValidationError(f"{len(labels)} labels for {len(instances)} instances")
    out = []
    for inst, lab in zip(instances, labels):
        if lab is None:
            lab = extract_labels(inst, params)
        out.append(lab)
    return out


class DigMilpGenerator(BaseEstimator):
    """Learns to rewrite constraints of labeled instances; ``sample`` produces new instances.

    Parameters mirror :class:`TrainConfig`. ``fit`` accepts instances and
    optional precomputed labels (``FTuple`` per instance).
    """

    def __init__(self, alpha=5.0, epochs=50, batch_size=8, lr=1e-3, latent_dim=8, hidden_dim=32,
                 huber_delta=1.0, seed=123):
        self.alpha = alpha
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr = lr
        self.latent_dim = latent_dim
        self.hidden_dim = hidden_dim
        self.huber_delta = huber_delta
        self.seed = seed

    def train_config(self) -> TrainConfig:
        return TrainConfig(**self.get_params())

    def fit(self, X, y=None):
        cfg = self.train_config()
        instances = check_instances(X)
        labels = label_dataset(instances, y)
        self.graphs_ = [encode_graph(t) for t in labels]
        if any(g.n_cons < 2 for g in self.graphs_):
            raise LastConstraint("training instances need at least two constraints")
        self.scaler_ = FeatureScaler().fit(self.graphs_)
        self.mode_ = instances[0].mode
        self.net_ = DigMilpNet(self.mode_, cfg.hidden_dim, cfg.latent_dim, cfg.seed)
        self.loss_trace_ = train(self.net_, self.graphs_, self.scaler_, cfg)
        return self

    def decoder(self):
        check_is_fitted(self, "net_")
        net, scaler, z_dim = self.net_, self.scaler_, self.net_.latent

        def decode(cg, rng):
            z = rng.standard_normal((cg.base.n_cons + 1 + cg.base.n_vars, z_dim))
            return net.decode_heads(graph_input(cg.base, scaler, erased=True), cg.removed_index, Tensor(z)).numpy()

        return decode

    def sample(self, n_samples=1, gamma=0.1, seed=0, dataset=None, return_graphs=False):
        """``n_samples`` new instances, each rewritten from a random source graph."""
        check_is_fitted(self, "net_")
        graphs = self.graphs_ if dataset is None else [g if isinstance(g, VCGraph) else encode_graph(g) for g in dataset]
        return sample_instances(graphs, self.decoder(), self.scaler_, InferConfig(gamma, n_samples, seed), return_graphs)

    def checksum(self) -> str:
        check_is_fitted(self, "net_")
        return hashlib.sha256(self.net_.store.flat().tobytes()).hexdigest()

    def save(self, path, extra_meta=None):
        check_is_fitted(self, "net_")
        meta = {
            "kind": "digmilp-vae",
            "params": self.get_params(),
            "mode": self.mode_.value,
            "scaler": self.scaler_.to_dict(),
            "loss_trace": [float(v) for v in self.loss_trace_],
        }
        meta.update(extra_meta or {})
        save_checkpoint(path, {k: t.data for k, t in self.net_.store}, meta)

    @classmethod
    def load(cls, path, graphs=None):
        tensors, meta = load_checkpoint(path)
        if meta.get("kind") != "digmilp-vae":
            raise ValidationError(f"{path} is not a generator checkpoint")
        est = cls(**meta["params"])
        est.mode_ = Mode(meta["mode"])
        est.scaler_ = FeatureScaler.from_dict(meta["scaler"])
        est.net_ = DigMilpNet(est.mode_, est.hidden_dim, est.latent_dim, est.seed)
        for name, t in est.net_.store:
            if name not in tensors or tensors[name].shape != t.shape:
                raise ValidationError(f"checkpoint tensor {name!r} missing or misshapen")
            t.data = tensors[name]
        est.loss_trace_ = meta.get("loss_trace", [])
        est.meta_ = meta
        if graphs is not None:
            est.graphs_ = list(graphs)
        return est


def train(net: DigMilpNet, graphs, scaler, cfg: TrainConfig) -> list[float]:
    """Mini-batch training; returns the mean loss of each epoch.

    Each epoch visits the dataset once in a seeded random order, in batches of
    ``cfg.batch_size``; every visit draws a fresh corruption and latent noise.
    """
    rng = np.random.default_rng(cfg.seed)
    state = AdamState()
    trace = []
    n = len(graphs)
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        epoch_losses = []
        for start in range(0, n, cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            net.store.zero_grad()
            losses = [elbo_loss(net, graphs[k], scaler, cfg.alpha, rng, cfg.huber_delta)[0] for k in batch]
            total = losses[0]
            for l in losses[1:]:
                total = ag.add(total, l)
            total = ag.mul(total, 1.0 / len(batch))
            total.backward()
            adam_step(net.store, net.store.grads(), state, cfg.lr)
            epoch_losses.append(total.item())
        trace.append(float(np.mean(epoch_losses)))
        log.debug("epoch %d loss %.5f", epoch, trace[-1])
    return trace


def sample_instances(graphs, decode, scaler, cfg: InferConfig, return_graphs=False):
    """New instances; output k uses its own rng stream derived from (seed, k)."""
    if not graphs:
        raise ValidationError("no source graphs to rewrite")
    out, out_graphs = [], []
    for k in range(cfg.count):
        rng = rng_for(cfg.seed, k)
        g = graphs[int(rng.integers(len(graphs)))]
        g_new, inst = sample_from_graph(g, decode, scaler, cfg.iterations(g.n_cons), rng, name=f"sample-{k}")
        out.append(inst)
        out_graphs.append(g_new)
    return (out, out_graphs) if return_graphs else out
