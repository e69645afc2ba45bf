"""Problem definitions, box geometry, presolve and first-order optimality checks."""

from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .cholesky import lower_csc

ACTIVE_RTOL = 1e-8
DEFAULT_KKT_TOL = 1e-4


class InfeasiblePointError(ValueError):
    """The point lies outside the box by more than the allowed tolerance."""


@dataclass(frozen=True, eq=False)
class Box:
    """Finite two-sided bounds ``lower <= x <= upper``."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.array(self.lower, dtype=float).reshape(-1)
        upper = np.array(self.upper, dtype=float).reshape(-1)
        if lower.shape != upper.shape:
            raise ValueError("lower and upper bounds differ in length")
        if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
            raise ValueError("bounds must be finite")
        bad = np.flatnonzero(lower > upper)
        if bad.size:
            raise ValueError(f"lower bound exceeds upper bound at index {bad[0]}")
        lower.flags.writeable = False
        upper.flags.writeable = False
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def dim(self):
        return self.lower.size

    @property
    def center(self):
        return 0.5 * (self.upper + self.lower)

    @property
    def half_width(self):
        return 0.5 * (self.upper - self.lower)

    def contains(self, x, tol=0.0):
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))

    def __eq__(self, other):
        if not isinstance(other, Box):
            return NotImplemented
        return np.array_equal(self.lower, other.lower) and np.array_equal(self.upper, other.upper)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Problem:
    """Smooth convex objective over a box.

    ``hessian(x)`` returns the lower triangle of the Hessian as a sparse
    matrix whose structure does not depend on ``x``.
    """

    dim: int
    objective: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    hessian: Callable[[np.ndarray], sp.spmatrix]
    box: Box

    def __post_init__(self):
        if self.dim < 0 or self.box.dim != self.dim:
            raise ValueError("box dimension does not match problem dimension")


@dataclass(frozen=True, eq=False)
class QuadraticProblem:
    """``f(x) = 0.5 x^T H x + b^T x + c0`` with ``H`` given by lower-triangle triplets.

    Duplicate triplets are summed; triplets are stored sorted by (row, col).
    """

    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray
    linear: np.ndarray
    box: Box
    constant: float = 0.0

    def __post_init__(self):
        m = self.box.dim
        rows = np.asarray(self.rows, dtype=np.int64).reshape(-1)
        cols = np.asarray(self.cols, dtype=np.int64).reshape(-1)
        vals = np.asarray(self.vals, dtype=float).reshape(-1)
        linear = np.array(self.linear, dtype=float).reshape(-1)
        if not (rows.size == cols.size == vals.size):
            raise ValueError("triplet arrays differ in length")
        if linear.size != m:
            raise ValueError("linear term length does not match box dimension")
        if rows.size and (rows.min() < 0 or rows.max() >= m or cols.min() < 0 or cols.max() >= m):
            raise ValueError("Hessian index out of range")
        upper = np.flatnonzero(cols > rows)
        if upper.size:
            t = upper[0]
            raise ValueError(f"upper-triangle Hessian entry ({rows[t]}, {cols[t]})")
        if not (np.all(np.isfinite(vals)) and np.all(np.isfinite(linear)) and np.isfinite(self.constant)):
            raise ValueError("non-finite problem data")
        keys = rows * max(m, 1) + cols
        uniq, inv = np.unique(keys, return_inverse=True)
        summed = np.zeros(uniq.size)
        np.add.at(summed, inv, vals)
        rows, cols = uniq // max(m, 1), uniq % max(m, 1)
        for name, arr in (("rows", rows), ("cols", cols), ("vals", summed), ("linear", linear)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "constant", float(self.constant))

    @classmethod
    def from_dense(cls, hessian, linear, box, constant=0.0):
        h = np.asarray(hessian, dtype=float)
        r, c = np.nonzero(np.tril(h))
        return cls(r, c, h[r, c], linear, box, constant)

    @property
    def dim(self):
        return self.box.dim

    @property
    def nnz(self):
        return int(self.vals.size)

    @cached_property
    def hessian_lower(self):
        m = self.dim
        return lower_csc(sp.coo_matrix((self.vals, (self.rows, self.cols)), shape=(m, m)))

    @cached_property
    def hessian_full(self):
        low = self.hessian_lower
        return (low + sp.tril(low, k=-1).T).tocsr()

    def dense_hessian(self):
        return self.hessian_full.toarray()

    def objective(self, x):
        x = np.asarray(x, dtype=float)
        return float(0.5 * x @ (self.hessian_full @ x) + self.linear @ x + self.constant)

    def gradient(self, x):
        return self.hessian_full @ np.asarray(x, dtype=float) + self.linear

    def hessian(self, x=None):
        return self.hessian_lower

    @cached_property
    def problem(self):
        """The generic :class:`Problem` view of this quadratic."""
        return Problem(self.dim, self.objective, self.gradient, self.hessian, self.box)

    def __eq__(self, other):
        if not isinstance(other, QuadraticProblem):
            return NotImplemented
        return (
            self.box == other.box
            and np.array_equal(self.rows, other.rows)
            and np.array_equal(self.cols, other.cols)
            and np.array_equal(self.vals, other.vals)
            and np.array_equal(self.linear, other.linear)
            and self.constant == other.constant
        )

    __hash__ = None


@dataclass(frozen=True)
class PresolveResult:
    reduced: QuadraticProblem
    fixed: list = field(default_factory=list)  # (original index, value)
    index_map: np.ndarray = None  # reduced index -> original index

    @property
    def reduced_problem(self):
        return self.reduced.problem

    @property
    def original_dim(self):
        return len(self.fixed) + len(self.index_map)

    def recombine(self, x_reduced):
        """Original-dimension vector from a reduced solution and the fixed values."""
        x = np.empty(self.original_dim)
        for i, v in self.fixed:
            x[i] = v
        x[self.index_map] = np.asarray(x_reduced, dtype=float)
        return x

    def restrict(self, x):
        return np.asarray(x, dtype=float)[self.index_map]


def presolve_fixed(qp):
    """Remove variables with ``l_i == u_i``, folding them into the linear and constant terms."""
    box = qp.box
    fixed_mask = box.lower == box.upper
    free = np.flatnonzero(~fixed_mask)
    fixed = np.flatnonzero(fixed_mask)
    if fixed.size == 0:
        return PresolveResult(qp, [], free)
    xb = box.lower[fixed]
    h = qp.hessian_full.tocsc()
    h_ff = h[free][:, free]
    h_fb = h[free][:, fixed]
    h_bb = h[fixed][:, fixed]
    linear = qp.linear[free] + h_fb @ xb
    constant = qp.constant + 0.5 * xb @ (h_bb @ xb) + qp.linear[fixed] @ xb
    low = sp.tril(h_ff).tocoo()
    reduced = QuadraticProblem(
        low.row, low.col, low.data, linear,
        Box(box.lower[free], box.upper[free]), constant,
    )
    return PresolveResult(reduced, [(int(i), float(v)) for i, v in zip(fixed, xb)], free)


def project(x, box):
    """Componentwise median of (l, x, u)."""
    return np.minimum(np.maximum(np.asarray(x, dtype=float), box.lower), box.upper)


def projected_gradient_residual(x, problem):
    """``|| proj(x - grad f(x)) - x ||_inf``; zero exactly at KKT points."""
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return 0.0
    return float(np.max(np.abs(project(x - problem.gradient(x), problem.box) - x)))


def active_mask(x, box, rtol=ACTIVE_RTOL):
    x = np.asarray(x, dtype=float)
    at_lower = np.abs(x - box.lower) < rtol * (1.0 + np.abs(box.lower))
    at_upper = np.abs(box.upper - x) < rtol * (1.0 + np.abs(box.upper))
    return at_lower, at_upper


def count_active(x, box):
    at_lower, at_upper = active_mask(x, box)
    return int(np.count_nonzero(at_lower | at_upper))


class BoundStatus(Enum):
    LOWER = "lower"
    FREE = "free"
    UPPER = "upper"


@dataclass(frozen=True)
class KKTReport:
    status: list
    violation: np.ndarray
    worst: float
    tol: float

    @property
    def satisfied(self):
        return self.worst <= self.tol


def kkt_report(x, problem, tol=DEFAULT_KKT_TOL):
    """Classify each variable as at-lower, free or at-upper and check its gradient sign.

    Raises
    ------
    InfeasiblePointError
        If ``x`` is outside the box by more than ``tol``; project it first.
    """
    x = np.asarray(x, dtype=float)
    box = problem.box
    if not box.contains(x, tol):
        raise InfeasiblePointError("point is outside the box; project it before the KKT check")
    g = problem.gradient(x)
    at_lower, at_upper = active_mask(x, box)
    # a variable pinned at both bounds satisfies either sign
    both = at_lower & at_upper
    violation = np.where(at_lower, np.maximum(0.0, -g), np.abs(g))
    violation = np.where(at_upper & ~at_lower, np.maximum(0.0, g), violation)
    violation = np.where(both, 0.0, violation)
    status = [
        BoundStatus.LOWER if lo else BoundStatus.UPPER if up else BoundStatus.FREE
        for lo, up in zip(at_lower, at_upper)
    ]
    worst = float(violation.max()) if violation.size else 0.0
    return KKTReport(status, violation, worst, tol)
