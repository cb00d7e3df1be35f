"""Feasible-bounded MILP instance generation by learned constraint rewriting."""
from .baselines import BowlyConfig, BowlyGenerator, RandomDecoderGenerator, bowly_instance, bowly_matrix
from .datasets import CaConfig, ScConfig, gen_comb_auction, gen_set_cover, generate_family
from .exceptions import (
    AssemblyFailure,
    DigMilpError,
    FormatError,
    LabelingFailure,
    NodeLimitExceeded,
    SolverLimit,
    ValidationError,
)
from .graph import FeatureScaler, VCGraph, corrupt, decode_instance, encode_graph
from .instance import FTuple, MilpInstance, Mode, Outcome, Status, derive_bc, derive_slacks, weak_duality_gap
from .io import load_instances, load_labeled, store_instances
from .solver import SolverParams, classify, extract_labels, lp_relaxation, solve_lp, solve_milp
from .vae import DigMilpGenerator, InferConfig, TrainConfig

__version__ = "0.1.0"

__all__ = [
    "AssemblyFailure", "BowlyConfig", "BowlyGenerator", "CaConfig", "DigMilpError", "DigMilpGenerator",
    "FTuple", "FeatureScaler", "FormatError", "InferConfig", "LabelingFailure", "MilpInstance", "Mode",
    "NodeLimitExceeded", "Outcome", "RandomDecoderGenerator", "ScConfig", "SolverLimit", "SolverParams",
    "Status", "TrainConfig", "VCGraph", "ValidationError", "bowly_instance", "bowly_matrix", "classify",
    "corrupt", "decode_instance", "derive_bc", "derive_slacks", "encode_graph", "extract_labels",
    "gen_comb_auction", "gen_set_cover", "generate_family", "load_instances", "load_labeled",
    "lp_relaxation", "solve_lp", "solve_milp", "store_instances", "weak_duality_gap",
]
