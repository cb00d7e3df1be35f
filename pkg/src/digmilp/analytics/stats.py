"""Nine structural statistics per instance."""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields

import numpy as np

from ..instance import MilpInstance

METRICS = (
    "density_mean",
    "cons_degree_mean",
    "cons_degree_std",
    "var_degree_mean",
    "var_degree_std",
    "b_mean",
    "b_std",
    "c_mean",
    "c_std",
)


@dataclass(frozen=True)
class StatProfile:
    density_mean: float
    cons_degree_mean: float
    cons_degree_std: float
    var_degree_mean: float
    var_degree_std: float
    b_mean: float
    b_std: float
    c_mean: float
    c_std: float

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, f.name) for f in fields(self)])

    def to_dict(self) -> dict:
        return asdict(self)


def instance_stats(inst: MilpInstance) -> StatProfile:
    m, n = inst.a.shape
    cons_deg = np.diff(inst.a.indptr).astype(np.float64)
    var_deg = np.bincount(inst.a.indices, minlength=n).astype(np.float64)
    return StatProfile(
        density_mean=inst.nnz / (m * n),
        cons_degree_mean=float(cons_deg.mean()),
        cons_degree_std=float(cons_deg.std()),
        var_degree_mean=float(var_deg.mean()),
        var_degree_std=float(var_deg.std()),
        b_mean=float(inst.b.mean()),
        b_std=float(inst.b.std()),
        c_mean=float(inst.c.mean()),
        c_std=float(inst.c.std()),
    )


def corpus_stats(instances) -> np.ndarray:
    """(len(instances), 9) matrix of statistics, columns ordered as METRICS."""
    return np.array([instance_stats(i).as_array() for i in instances]).reshape(-1, len(METRICS))


def summarize(instances) -> dict:
    """Corpus means of each statistic."""
    mat = corpus_stats(instances)
    return {k: float(v) for k, v in zip(METRICS, mat.mean(axis=0))}
