"""Pearson correlation and the solver-configuration transfer harness."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from ..exceptions import ConstantInput, NodeLimitExceeded, ValidationError
from ..solver import BranchingRule, SolverParams, solve_milp


@dataclass(frozen=True)
class CorrelationReport:
    r: float
    p: float
    n: int

    def to_dict(self):
        return {"r": self.r, "p": self.p, "n": self.n}


def pearson(xs, ys) -> CorrelationReport:
    """Pearson r with a two-sided p-value from Student's t with n - 2 dof."""
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValidationError("pearson needs two 1-D sequences of equal length")
    n = x.size
    if n < 3:
        raise ValidationError("pearson needs at least 3 points")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx, syy = np.dot(dx, dx), np.dot(dy, dy)
    if sxx == 0 or syy == 0:
        raise ConstantInput("pearson is undefined for constant input")
    # one square root keeps exact multiples (and xs == ys) at |r| == 1
    r = float(np.clip(np.dot(dx, dy) / np.sqrt(sxx * syy), -1.0, 1.0))
    dof = n - 2
    if abs(r) == 1.0:
        return CorrelationReport(r, 0.0, n)
    t2 = r * r * dof / (1.0 - r * r)
    # two-sided tail of Student's t: I_{dof/(dof+t^2)}(dof/2, 1/2)
    p = float(special.betainc(0.5 * dof, 0.5, dof / (dof + t2)))
    return CorrelationReport(r, min(p, 1.0), n)


def solver_configs(n_configs: int, offset: int = 0, **overrides) -> list[SolverParams]:
    """Configurations drawn from seeds offset .. offset + n_configs - 1."""
    return [SolverParams.random(offset + k, **overrides) for k in range(n_configs)]


def effort_profile(corpus, configs, metric="nodes") -> np.ndarray:
    """Total effort of solving the corpus under each configuration."""
    if metric not in ("nodes", "pivots"):
        raise ValidationError("metric must be 'nodes' or 'pivots'")
    corpus = list(corpus)
    out = np.zeros(len(configs))
    seen = {}
    for k, params in enumerate(configs):
        # the branching seed only matters under pseudo-random branching
        key = _effective(params)
        if key not in seen:
            total = 0
            for inst in corpus:
                rep = solve_milp(inst, params)
                if rep.limit_hit:
                    raise NodeLimitExceeded(f"{inst.name}: node limit under config {k}")
                total += rep.effort_nodes if metric == "nodes" else rep.effort_pivots
            seen[key] = total
        out[k] = seen[key]
    return out


def _effective(params: SolverParams) -> tuple:
    d = params.to_dict()
    if params.branching_rule is not BranchingRule.PSEUDO_RANDOM:
        d["branching_seed"] = 0
    return tuple(sorted(d.items()))


def tuning_correlation(corpus_a, corpus_b, n_configs=45, seed=0, metric="nodes") -> CorrelationReport:
    """Correlation of per-configuration solve effort between two corpora."""
    configs = solver_configs(n_configs, seed)
    return pearson(effort_profile(corpus_a, configs, metric), effort_profile(corpus_b, configs, metric))
