"""Canonical MILP instances and the primal/dual slack algebra.

Every instance is stored as

    max c^T x  s.t.  A x <= b,  x >= 0 integral  (and x <= 1 in binary mode).

A feasible-bounded instance is fully described by a tuple (A, x, y, s, r) with
x a feasible integral point, y a feasible point of the dual of the LP
relaxation and s, r the nonnegative slacks, because

    b = A x + r,    c = A^T y - s          (general integer)
    b = A x + r,    c = A^T y1 + y2 - s    (binary; y2 prices the x <= 1 rows)

Conversely any such tuple yields a feasible (x is a witness) and bounded
(weak duality caps c^T x by b^T y) instance.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .exceptions import DimensionMismatch, FeasibilityViolation, ValidationError

TOL = 1e-9


class Mode(str, enum.Enum):
    GENERAL = "GeneralInteger"
    BINARY = "Binary"


class Status(str, enum.Enum):
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    OPTIMAL = "Optimal"


@dataclass(frozen=True)
class Outcome:
    status: Status
    value: Optional[float] = None
    solution: Optional[np.ndarray] = None

    def __post_init__(self):
        has = self.value is not None and self.solution is not None
        if has != (self.status is Status.OPTIMAL):
            raise ValidationError("value/solution must be present iff status is Optimal")


def _as_mode(mode) -> Mode:
    if isinstance(mode, Mode):
        return mode
    try:
        return Mode(mode)
    except ValueError:
        raise ValidationError(f"unknown mode {mode!r}") from None


def as_csr(a) -> sp.csr_matrix:
    """Coerce to float CSR with explicit zeros dropped and indices sorted."""
    if sp.issparse(a):
        m = sp.csr_matrix(a, dtype=np.float64, copy=True)
    else:
        arr = np.asarray(a, dtype=np.float64)
        if arr.ndim != 2:
            raise DimensionMismatch(f"coefficient matrix must be 2-D, got shape {arr.shape}")
        m = sp.csr_matrix(arr)
    m.eliminate_zeros()
    m.sort_indices()
    if not np.all(np.isfinite(m.data)):
        raise ValidationError("coefficient matrix has non-finite entries")
    return m


def check_vector(v, n: int, name: str) -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1 or arr.shape[0] != n:
        raise DimensionMismatch(f"{name} must have shape ({n},), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} has non-finite entries")
    arr = arr.copy()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class MilpInstance:
    """max c^T x s.t. A x <= b, x >= 0 integral.

    ``objective_sign`` is -1 when the instance was ingested from a
    minimization problem; multiply reported objectives by it to recover the
    original sense.
    """

    a: sp.csr_matrix
    b: np.ndarray
    c: np.ndarray
    mode: Mode = Mode.GENERAL
    name: str = "instance"
    objective_sign: int = 1

    def __post_init__(self):
        a = as_csr(self.a)
        m, n = a.shape
        if m < 1 or n < 1:
            raise ValidationError(f"instance needs at least one row and column, got {a.shape}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", check_vector(self.b, m, "b"))
        object.__setattr__(self, "c", check_vector(self.c, n, "c"))
        object.__setattr__(self, "mode", _as_mode(self.mode))
        if self.objective_sign not in (1, -1):
            raise ValidationError("objective_sign must be +1 or -1")

    @property
    def n_cons(self) -> int:
        return self.a.shape[0]

    @property
    def n_vars(self) -> int:
        return self.a.shape[1]

    @property
    def nnz(self) -> int:
        return self.a.nnz

    @property
    def upper_bound(self) -> float:
        return 1.0 if self.mode is Mode.BINARY else np.inf

    def dense(self) -> np.ndarray:
        return self.a.toarray()

    def objective(self, x) -> float:
        return float(self.c @ np.asarray(x, dtype=np.float64))

    def is_feasible(self, x, tol: float = TOL) -> bool:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.n_vars,) or np.any(x < -tol):
            return False
        if np.any(np.abs(x - np.round(x)) > tol):
            return False
        if self.mode is Mode.BINARY and np.any(x > 1 + tol):
            return False
        return bool(np.all(self.a @ x <= self.b + tol))

    def with_name(self, name: str) -> "MilpInstance":
        return MilpInstance(self.a, self.b, self.c, self.mode, name, self.objective_sign)

    def equals(self, other: "MilpInstance") -> bool:
        """Bit-exact structural equality (used by round-trip tests)."""
        return (
            self.mode is other.mode
            and self.a.shape == other.a.shape
            and np.array_equal(self.a.indptr, other.a.indptr)
            and np.array_equal(self.a.indices, other.a.indices)
            and np.array_equal(self.a.data, other.a.data)
            and np.array_equal(self.b, other.b)
            and np.array_equal(self.c, other.c)
        )


@dataclass(frozen=True, eq=False)
class FTuple:
    """(A, x, y, s, r): an integral primal point, a dual point and both slacks.

    In binary mode ``y`` holds the duals of the A-rows (y1) and ``y2`` the
    duals of the x <= 1 rows.
    """

    a: sp.csr_matrix
    x: np.ndarray
    y: np.ndarray
    s: np.ndarray
    r: np.ndarray
    mode: Mode = Mode.GENERAL
    y2: Optional[np.ndarray] = None

    def __post_init__(self):
        a = as_csr(self.a)
        m, n = a.shape
        mode = _as_mode(self.mode)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "mode", mode)
        x = check_vector(self.x, n, "x")
        for name, vec, size in (("y", self.y, m), ("s", self.s, n), ("r", self.r, m)):
            arr = check_vector(vec, size, name)
            if np.any(arr < 0):
                raise ValidationError(f"{name} must be nonnegative")
            object.__setattr__(self, name, arr)
        if np.any(x < 0) or np.any(x != np.round(x)):
            raise ValidationError("x must be a nonnegative integer vector")
        if mode is Mode.BINARY:
            if np.any(x > 1):
                raise ValidationError("x must be 0/1 in binary mode")
            if self.y2 is None:
                raise ValidationError("binary tuples need y2")
            y2 = check_vector(self.y2, n, "y2")
            if np.any(y2 < 0):
                raise ValidationError("y2 must be nonnegative")
            object.__setattr__(self, "y2", y2)
        elif self.y2 is not None:
            raise ValidationError("y2 is only defined in binary mode")
        object.__setattr__(self, "x", x)

    @property
    def n_cons(self) -> int:
        return self.a.shape[0]

    @property
    def n_vars(self) -> int:
        return self.a.shape[1]

    def to_instance(self, name: str = "instance") -> MilpInstance:
        b, c = derive_bc(self)
        return MilpInstance(self.a, b, c, self.mode, name)


def derive_bc(t: FTuple) -> tuple[np.ndarray, np.ndarray]:
    """Right-hand side and objective implied by a tuple."""
    b = t.a @ t.x + t.r
    c = t.a.T @ t.y - t.s
    if t.mode is Mode.BINARY:
        c = c + t.y2
    if not (np.all(np.isfinite(b)) and np.all(np.isfinite(c))):
        raise ValidationError("derived b/c overflowed")
    return np.asarray(b, dtype=np.float64), np.asarray(c, dtype=np.float64)


def _clamp_slack(v: np.ndarray, tol: float, name: str) -> np.ndarray:
    worst = float(v.min()) if v.size else 0.0
    if worst < -tol:
        raise FeasibilityViolation(f"{name} slack {worst:.3e} below -{tol:g}")
    return np.where(v < 0, 0.0, v)


def derive_slacks(inst: MilpInstance, x, y, y2=None, tol: float = TOL):
    """Slacks (s, r) of a primal point x and dual point y.

    Returns ``(s, r)``; round-off in (-tol, 0) is clamped to zero.
    """
    x = check_vector(x, inst.n_vars, "x")
    y = check_vector(y, inst.n_cons, "y")
    r = _clamp_slack(inst.b - inst.a @ x, tol, "primal")
    dual = inst.a.T @ y
    if inst.mode is Mode.BINARY:
        if y2 is None:
            raise ValidationError("binary instances need y2")
        dual = dual + check_vector(y2, inst.n_vars, "y2")
    s = _clamp_slack(dual - inst.c, tol, "dual")
    return s, r


def weak_duality_gap(inst: MilpInstance, x, y, y2=None) -> float:
    """b^T y - c^T x (plus 1^T y2 in binary mode); nonnegative for feasible pairs."""
    x = check_vector(x, inst.n_vars, "x")
    y = check_vector(y, inst.n_cons, "y")
    gap = float(inst.b @ y - inst.c @ x)
    if inst.mode is Mode.BINARY and y2 is not None:
        gap += float(np.sum(check_vector(y2, inst.n_vars, "y2")))
    return gap


@dataclass(frozen=True)
class DualLP:
    """min cost^T y s.t. G y >= rhs, y >= 0 (the dual of the LP relaxation)."""

    g: np.ndarray
    rhs: np.ndarray
    cost: np.ndarray
    n_cons: int = field(default=0)

    def as_max_le(self):
        """Equivalent max (-cost)^T y s.t. (-G) y <= -rhs for the simplex."""
        return -self.cost, -self.g, -self.rhs


def to_dual_lp(inst: MilpInstance) -> DualLP:
    at = inst.a.T.toarray()
    cost = inst.b.copy()
    if inst.mode is Mode.BINARY:
        at = np.hstack([at, np.eye(inst.n_vars)])
        cost = np.concatenate([cost, np.ones(inst.n_vars)])
    return DualLP(g=at, rhs=inst.c.copy(), cost=cost, n_cons=inst.n_cons)


def canonicalize(a, b, c, sense: str = "max", row_sense=None, mode=Mode.GENERAL, name="instance"):
    """Bring an external problem into max / <= form.

    ``row_sense`` is a sequence of "<=" / ">=" per row (default all "<=").
    Minimization is turned into maximization of -c and recorded in
    ``objective_sign``.
    """
    a = as_csr(a)
    b = np.asarray(b, dtype=np.float64).copy()
    c = np.asarray(c, dtype=np.float64).copy()
    if row_sense is not None:
        flip = np.array([s == ">=" for s in row_sense])
        bad = [s for s in row_sense if s not in ("<=", ">=")]
        if bad:
            raise ValidationError(f"unsupported row sense {bad[0]!r}")
        if flip.any():
            d = sp.diags(np.where(flip, -1.0, 1.0))
            a = as_csr(d @ a)
            b = np.where(flip, -b, b)
    if sense not in ("max", "min"):
        raise ValidationError(f"unknown objective sense {sense!r}")
    sign = 1
    if sense == "min":
        c = -c
        sign = -1
    return MilpInstance(a, b, c, mode, name, sign)
