"""Embedded LP (two-phase tableau simplex) and MILP (branch-and-bound) solver.

Work is reported as deterministic counters (nodes, pivots) instead of time.
"""
from __future__ import annotations

import enum
import heapq
from dataclasses import asdict, dataclass
from typing import Optional, Union

import numpy as np

from .exceptions import (
    LabelingFailure,
    NodeLimitExceeded,
    PivotLimitExceeded,
    ValidationError,
)
from .instance import (
    TOL,
    DualLP,
    FTuple,
    MilpInstance,
    Mode,
    Outcome,
    Status,
    derive_slacks,
    to_dual_lp,
)

_PIV_EPS = 1e-9
_RC_EPS = 1e-9
_FEAS_EPS = 1e-7
_DEGEN_EPS = 1e-12  # step length below this counts as a degenerate pivot
_BLAND_AFTER = 50  # degenerate pivots in a row before Bland's rule takes over


class BranchingRule(str, enum.Enum):
    MOST_FRACTIONAL = "MostFractional"
    FIRST_FRACTIONAL = "FirstFractional"
    PSEUDO_RANDOM = "PseudoRandom"


class NodeSelection(str, enum.Enum):
    DEPTH_FIRST = "DepthFirst"
    BEST_BOUND = "BestBound"
    HYBRID = "Hybrid"


@dataclass(frozen=True)
class SolverParams:
    branching_rule: BranchingRule = BranchingRule.MOST_FRACTIONAL
    node_selection: NodeSelection = NodeSelection.BEST_BOUND
    max_nodes: int = 100_000
    max_pivots_per_lp: int = 50_000
    integrality_tol: float = 1e-6
    branching_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "branching_rule", BranchingRule(self.branching_rule))
        object.__setattr__(self, "node_selection", NodeSelection(self.node_selection))
        if self.max_nodes < 1 or self.max_pivots_per_lp < 1:
            raise ValidationError("solver limits must be >= 1")
        if not 0 < self.integrality_tol < 1e-2:
            raise ValidationError("integrality_tol must lie in (0, 1e-2)")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["branching_rule"] = self.branching_rule.value
        d["node_selection"] = self.node_selection.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SolverParams":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValidationError(f"unknown solver keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def random(cls, seed: int, **overrides) -> "SolverParams":
        """A configuration drawn from ``seed`` (used by the tuning harness)."""
        rng = np.random.default_rng(seed)
        rules = list(BranchingRule)
        sels = list(NodeSelection)
        kw = dict(
            branching_rule=rules[int(rng.integers(len(rules)))],
            node_selection=sels[int(rng.integers(len(sels)))],
            branching_seed=int(rng.integers(2**31)),
        )
        kw.update(overrides)
        return cls(**kw)


@dataclass(frozen=True)
class SolveReport:
    outcome: Optional[Outcome]
    effort_nodes: int
    effort_pivots: int
    limit_hit: bool = False
    best_bound: Optional[float] = None

    def line(self) -> str:
        status = self.outcome.status.value if self.outcome else "Unknown"
        value = "-" if self.outcome is None or self.outcome.value is None else f"{self.outcome.value:.10g}"
        tag = " limit_hit" if self.limit_hit else ""
        return f"status={status} value={value} nodes={self.effort_nodes} pivots={self.effort_pivots}{tag}"


@dataclass(frozen=True)
class LinearProgram:
    """max c^T x s.t. A x <= b, x >= 0 (dense)."""

    c: np.ndarray
    a: np.ndarray
    b: np.ndarray


@dataclass
class _LPResult:
    status: Status
    value: Optional[float]
    x: Optional[np.ndarray]
    pivots: int


# ---------------------------------------------------------------------------
# simplex


class _Tableau:
    """Dense tableau for max cost^T v over {D v = rhs, v >= 0}.

    ``rows`` holds [D | rhs]; ``obj`` holds the reduced-cost row in the
    convention obj[j] = cost_B B^-1 D_j - cost_j (entering when negative).
    """

    def __init__(self, rows, basis, max_pivots, pivots=0):
        self.rows = rows
        self.basis = basis
        self.max_pivots = max_pivots
        self.pivots = pivots
        self.obj = None

    def set_cost(self, cost):
        obj = np.zeros(self.rows.shape[1])
        obj[: cost.size] = -cost
        for i, j in enumerate(self.basis):
            if obj[j] != 0.0:
                obj -= obj[j] * self.rows[i]
        self.obj = obj

    def pivot(self, r, j):
        if self.pivots >= self.max_pivots:
            raise PivotLimitExceeded(f"pivot limit {self.max_pivots} reached")
        rows = self.rows
        rows[r] /= rows[r, j]
        col = rows[:, j].copy()
        col[r] = 0.0
        rows -= np.outer(col, rows[r])
        if self.obj is not None:
            self.obj -= self.obj[j] * rows[r]
        self.basis[r] = j
        self.pivots += 1

    def run(self, n_cols, bland_after):
        """Iterate to optimality. Returns False when unbounded.

        Dantzig pricing, switching to Bland's rule after ``bland_after``
        consecutive degenerate pivots and back on the next pivot that moves.
        Bland cannot cycle inside one vertex and every moving pivot strictly
        improves the objective, so the loop terminates.
        """
        stalled = 0
        rows = self.rows
        while True:
            rc = self.obj[:n_cols]
            if stalled < bland_after:
                j = int(np.argmin(rc))
                if rc[j] >= -_RC_EPS:
                    return True
            else:
                neg = np.flatnonzero(rc < -_RC_EPS)
                if neg.size == 0:
                    return True
                j = int(neg[0])
            col = rows[:, j]
            pos = np.flatnonzero(col > _PIV_EPS)
            if pos.size == 0:
                return False
            ratios = rows[pos, -1] / col[pos]
            best = ratios.min()
            ties = pos[ratios <= best + 1e-12 * max(1.0, abs(best))]
            if ties.size > 1:
                r = int(ties[np.argmin([self.basis[t] for t in ties])])
            else:
                r = int(ties[0])
            self.pivot(r, j)
            stalled = stalled + 1 if best <= _DEGEN_EPS else 0


def _simplex_max_le(c, a, b, max_pivots) -> _LPResult:
    m, n = a.shape
    flip = b < 0
    n_art = int(flip.sum())
    width = n + m + n_art + 1
    rows = np.zeros((m, width))
    rows[:, :n] = a
    rows[np.arange(m), n + np.arange(m)] = 1.0
    rows[:, -1] = b
    rows[flip] *= -1.0
    basis = list(range(n, n + m))
    art_rows = np.flatnonzero(flip)
    for k, i in enumerate(art_rows):
        rows[i, n + m + k] = 1.0
        basis[i] = n + m + k
    tab = _Tableau(rows, basis, max_pivots)
    bland_after = _BLAND_AFTER

    if n_art:
        cost1 = np.zeros(n + m + n_art)
        cost1[n + m:] = -1.0
        tab.set_cost(cost1)
        tab.run(n + m + n_art, bland_after)
        if tab.obj[-1] < -_FEAS_EPS * max(1.0, np.abs(b).max()):
            return _LPResult(Status.INFEASIBLE, None, None, tab.pivots)
        # drive remaining artificials out of the basis
        keep = np.ones(m, dtype=bool)
        for i in range(m):
            if tab.basis[i] >= n + m:
                cand = np.flatnonzero(np.abs(tab.rows[i, : n + m]) > _PIV_EPS)
                if cand.size:
                    tab.pivot(i, int(cand[0]))
                else:
                    keep[i] = False
        tab.rows = np.hstack([tab.rows[keep, : n + m], tab.rows[keep, -1:]])
        tab.basis = [bj for bj, k in zip(tab.basis, keep) if k]
    cost2 = np.zeros(n + m)
    cost2[:n] = c
    tab.set_cost(cost2)
    if not tab.run(n + m, bland_after):
        return _LPResult(Status.UNBOUNDED, None, None, tab.pivots)

    v = np.zeros(n + m)
    v[tab.basis] = tab.rows[:, -1]
    if len(tab.basis) == m:
        # recompute the basic solution from the original data to shed round-off
        full = np.hstack([a, np.eye(m)])
        try:
            vb = np.linalg.solve(full[:, tab.basis], b)
            if np.all(np.isfinite(vb)) and np.max(np.abs(vb - v[tab.basis])) < 1e-6 * max(1.0, np.abs(vb).max()):
                v[tab.basis] = vb
        except np.linalg.LinAlgError:
            pass
    x = v[:n]
    x[np.abs(x) < 1e-12] = 0.0
    x = np.maximum(x, 0.0)
    return _LPResult(Status.OPTIMAL, float(c @ x), x, tab.pivots)


LPLike = Union[LinearProgram, DualLP]


def solve_lp(lp: LPLike, max_pivots: int = 50_000) -> Outcome:
    """Solve an LP with the two-phase simplex.

    Accepts a :class:`LinearProgram` (max / <= / x >= 0) or a :class:`DualLP`
    (min / >= / y >= 0); the reported value is in the problem's own sense.
    """
    return _solve_lp(lp, max_pivots)[0]


def _solve_lp(lp: LPLike, max_pivots: int):
    if isinstance(lp, DualLP):
        c, a, b = lp.as_max_le()
        res = _simplex_max_le(c, a, b, max_pivots)
        if res.status is Status.OPTIMAL:
            return Outcome(Status.OPTIMAL, -res.value, res.x), res.pivots
        return Outcome(res.status), res.pivots
    c = np.asarray(lp.c, dtype=np.float64)
    a = np.atleast_2d(np.asarray(lp.a, dtype=np.float64))
    b = np.asarray(lp.b, dtype=np.float64)
    if a.shape != (b.size, c.size):
        raise ValidationError(f"LP shapes disagree: A{a.shape}, b{b.shape}, c{c.shape}")
    res = _simplex_max_le(c, a, b, max_pivots)
    if res.status is Status.OPTIMAL:
        return Outcome(Status.OPTIMAL, res.value, res.x), res.pivots
    return Outcome(res.status), res.pivots


# ---------------------------------------------------------------------------
# branch and bound


class _NodeLP:
    """LP relaxation of an instance restricted to box bounds lo <= x <= hi."""

    def __init__(self, inst: MilpInstance, objective=None):
        self.a = inst.dense()
        self.b = inst.b
        self.c = inst.c if objective is None else objective
        self.n = inst.n_vars

    def solve(self, lo, hi, max_pivots):
        if np.any(hi < lo):
            return _LPResult(Status.INFEASIBLE, None, None, 0)
        free = hi > lo
        rhs = self.b - self.a @ lo
        af = self.a[:, free]
        ub = (hi - lo)[free]
        finite = np.isfinite(ub)
        nf = int(free.sum())
        if finite.any():
            box = np.eye(nf)[finite]
            a_full = np.vstack([af, box])
            b_full = np.concatenate([rhs, ub[finite]])
        else:
            a_full, b_full = af, rhs
        base = float(self.c @ lo)
        if nf == 0:
            if np.all(rhs >= -_FEAS_EPS):
                return _LPResult(Status.OPTIMAL, base, lo.copy(), 0)
            return _LPResult(Status.INFEASIBLE, None, None, 0)
        res = _simplex_max_le(self.c[free], a_full, b_full, max_pivots)
        if res.status is not Status.OPTIMAL:
            return res
        x = lo.copy()
        x[free] += res.x
        return _LPResult(Status.OPTIMAL, base + res.value, x, res.pivots)


def _initial_bounds(inst):
    lo = np.zeros(inst.n_vars)
    hi = np.full(inst.n_vars, inst.upper_bound)
    return lo, hi


def _choose_branch(x, tol, rule, rng):
    frac = x - np.floor(x)
    cand = np.flatnonzero((frac > tol) & (frac < 1 - tol))
    if cand.size == 0:
        return None
    if rule is BranchingRule.FIRST_FRACTIONAL:
        return int(cand[0])
    if rule is BranchingRule.MOST_FRACTIONAL:
        score = np.minimum(frac[cand], 1 - frac[cand])
        return int(cand[np.argmax(score)])
    return int(cand[rng.integers(cand.size)])


def _branch_and_bound(inst, params, objective=None, stop_at_first=False):
    node_lp = _NodeLP(inst, objective)
    c = node_lp.c
    rng = np.random.default_rng(params.branching_seed)
    tol = params.integrality_tol
    lo0, hi0 = _initial_bounds(inst)

    nodes = 0
    pivots = 0
    best_val = -np.inf
    best_x = None
    counter = 0
    # heap entries: (key, counter, bound, lo, hi); key orders the open list
    open_nodes: list = []
    depth_first = params.node_selection is NodeSelection.DEPTH_FIRST

    def key(bound, depth):
        if depth_first or (params.node_selection is NodeSelection.HYBRID and best_x is None):
            return (-depth, 0.0)
        return (0, -bound)

    heapq.heappush(open_nodes, (key(np.inf, 0), counter, np.inf, 0, lo0, hi0))
    limit_hit = False
    root_unbounded = False
    pending_bound = -np.inf
    while open_nodes:
        _, _, parent_bound, depth, lo, hi = heapq.heappop(open_nodes)
        if parent_bound <= best_val + 1e-9 * max(1.0, abs(best_val)):
            continue
        if nodes >= params.max_nodes:
            limit_hit = True
            pending_bound = parent_bound
            break
        nodes += 1
        res = node_lp.solve(lo, hi, params.max_pivots_per_lp)
        pivots += res.pivots
        if res.status is Status.INFEASIBLE:
            continue
        if res.status is Status.UNBOUNDED:
            # only reachable at the root: sub-boxes of a bounded LP stay bounded
            root_unbounded = True
            break
        if res.value <= best_val + 1e-9 * max(1.0, abs(best_val)):
            continue
        j = _choose_branch(res.x, tol, params.branching_rule, rng)
        if j is None:
            best_val = res.value
            best_x = np.round(res.x)
            best_val = float(c @ best_x)
            if stop_at_first:
                break
            if params.node_selection is NodeSelection.HYBRID:
                open_nodes = [(key(e[2], e[3]), e[1], e[2], e[3], e[4], e[5]) for e in open_nodes]
                heapq.heapify(open_nodes)
            continue
        xj = res.x[j]
        down_hi = hi.copy()
        down_hi[j] = np.floor(xj)
        up_lo = lo.copy()
        up_lo[j] = np.ceil(xj)
        # floor child explored first: pushed last onto the LIFO side / earlier counter
        counter += 1
        up = (key(res.value, depth + 1), counter + 1, res.value, depth + 1, up_lo, hi)
        down = (key(res.value, depth + 1), counter, res.value, depth + 1, lo, down_hi)
        counter += 1
        heapq.heappush(open_nodes, down)
        heapq.heappush(open_nodes, up)

    best_bound = None
    if limit_hit:
        best_bound = float(max([e[2] for e in open_nodes] + [best_val, pending_bound]))
    return dict(
        nodes=nodes,
        pivots=pivots,
        best_val=best_val,
        best_x=best_x,
        limit_hit=limit_hit,
        root_unbounded=root_unbounded,
        best_bound=best_bound,
    )


def solve_milp(inst: MilpInstance, params: Optional[SolverParams] = None, raise_on_limit: bool = False) -> SolveReport:
    """Exact branch-and-bound. Deterministic for fixed (instance, params)."""
    params = params or SolverParams()
    run = _branch_and_bound(inst, params)
    nodes, pivots = run["nodes"], run["pivots"]
    if run["root_unbounded"]:
        probe = _branch_and_bound(inst, params, objective=np.zeros(inst.n_vars), stop_at_first=True)
        nodes += probe["nodes"]
        pivots += probe["pivots"]
        if probe["limit_hit"]:
            if raise_on_limit:
                raise NodeLimitExceeded("node limit reached during feasibility probe")
            return SolveReport(None, nodes, pivots, True)
        status = Status.UNBOUNDED if probe["best_x"] is not None else Status.INFEASIBLE
        return SolveReport(Outcome(status), nodes, pivots)
    if run["limit_hit"]:
        if raise_on_limit:
            raise NodeLimitExceeded(f"node limit {params.max_nodes} reached")
        out = None
        if run["best_x"] is not None:
            out = Outcome(Status.OPTIMAL, run["best_val"], run["best_x"])
        return SolveReport(out, nodes, pivots, True, run["best_bound"])
    if run["best_x"] is None:
        return SolveReport(Outcome(Status.INFEASIBLE), nodes, pivots)
    return SolveReport(Outcome(Status.OPTIMAL, run["best_val"], run["best_x"]), nodes, pivots)


def lp_relaxation(inst: MilpInstance, max_pivots: int = 50_000) -> Outcome:
    lo, hi = _initial_bounds(inst)
    res = _NodeLP(inst).solve(lo, hi, max_pivots)
    if res.status is Status.OPTIMAL:
        return Outcome(Status.OPTIMAL, res.value, res.x)
    return Outcome(res.status)


def _rounding_candidates(inst: MilpInstance, point: Optional[np.ndarray]):
    yield np.zeros(inst.n_vars)
    if point is not None:
        yield np.round(point)
        yield np.floor(point + 1e-9)
        yield np.ceil(point - 1e-9)
    if inst.mode is Mode.BINARY:
        yield np.ones(inst.n_vars)


def find_feasible(inst: MilpInstance, params: Optional[SolverParams] = None,
                  objective: Optional[np.ndarray] = None) -> Optional[np.ndarray]:
    """First integral point found by a depth-first search, or None.

    ``objective`` steers the dive; the default zero objective makes any LP vertex acceptable.
    """
    params = params or SolverParams(node_selection=NodeSelection.DEPTH_FIRST)
    obj = np.zeros(inst.n_vars) if objective is None else objective
    run = _branch_and_bound(inst, params, objective=obj, stop_at_first=True)
    if run["limit_hit"]:
        raise NodeLimitExceeded("node limit reached while searching for a feasible point")
    return run["best_x"]


def classify(inst: MilpInstance, params: Optional[SolverParams] = None) -> Status:
    """Infeasible / Unbounded / Optimal, decided via the LP relaxation plus a feasibility probe."""
    params = params or SolverParams(node_selection=NodeSelection.DEPTH_FIRST)
    relax = lp_relaxation(inst, params.max_pivots_per_lp)
    if relax.status is Status.INFEASIBLE:
        return Status.INFEASIBLE
    point = relax.solution if relax.status is Status.OPTIMAL else None
    if any(inst.is_feasible(x) for x in _rounding_candidates(inst, point)):
        return Status.UNBOUNDED if relax.status is Status.UNBOUNDED else Status.OPTIMAL
    steer = inst.c if relax.status is Status.OPTIMAL else None
    if find_feasible(inst, params, steer) is None:
        return Status.INFEASIBLE
    return Status.UNBOUNDED if relax.status is Status.UNBOUNDED else Status.OPTIMAL


def solve_dual(inst: MilpInstance, max_pivots: int = 50_000):
    """Optimal basic solution of the dual of the LP relaxation as (y, y2)."""
    out = solve_lp(to_dual_lp(inst), max_pivots)
    if out.status is not Status.OPTIMAL:
        return out, None, None
    y = out.solution[: inst.n_cons]
    y2 = out.solution[inst.n_cons:] if inst.mode is Mode.BINARY else None
    return out, y, y2


def extract_labels(inst: MilpInstance, params: Optional[SolverParams] = None, first_incumbent: bool = False) -> FTuple:
    """Primal point, dual point and slacks of a feasible-bounded instance."""
    params = params or SolverParams()
    if first_incumbent:
        x = find_feasible(inst)
        if x is None:
            raise LabelingFailure(f"{inst.name}: instance is infeasible")
    else:
        rep = solve_milp(inst, params)
        if rep.limit_hit:
            raise LabelingFailure(f"{inst.name}: node limit reached")
        if rep.outcome.status is not Status.OPTIMAL:
            raise LabelingFailure(f"{inst.name}: instance is {rep.outcome.status.value}")
        x = rep.outcome.solution
    out, y, y2 = solve_dual(inst, params.max_pivots_per_lp)
    if out.status is not Status.OPTIMAL:
        raise LabelingFailure(f"{inst.name}: dual LP is {out.status.value}")
    s, r = derive_slacks(inst, x, y, y2, tol=TOL * max(1.0, _scale(inst)))
    return FTuple(inst.a, x, y, s, r, inst.mode, y2)


def _scale(inst):
    return float(max(np.abs(inst.b).max(), np.abs(inst.c).max(), np.abs(inst.a.data).max()))
