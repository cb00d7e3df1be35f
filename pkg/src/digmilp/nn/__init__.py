from . import autograd
from .autograd import Tensor, huber
from .checkpoint import load_checkpoint, save_checkpoint
from .functional import kl_std_normal, reparameterize
from .gnn import BipartiteGNN, GraphInput, NodeEmbeddings, gnn_forward
from .layers import MLP, Linear, ParamStore
from .optim import AdamState, adam_step

__all__ = [
    "AdamState", "BipartiteGNN", "GraphInput", "Linear", "MLP", "NodeEmbeddings", "ParamStore",
    "Tensor", "adam_step", "autograd", "gnn_forward", "huber", "kl_std_normal",
    "load_checkpoint", "reparameterize", "save_checkpoint",
]
