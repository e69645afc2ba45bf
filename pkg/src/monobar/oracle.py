"""Exact solutions of small box-constrained convex QPs by active-set enumeration."""

import itertools
from dataclasses import dataclass

import numpy as np

from .model import BoundStatus

MAX_ORACLE_DIM = 12
_ORDER = (BoundStatus.LOWER, BoundStatus.FREE, BoundStatus.UPPER)


class OracleError(RuntimeError):
    pass


@dataclass(frozen=True)
class OracleSolution:
    x: np.ndarray
    f_value: float
    pattern: tuple
    n_passing: int = 1

    @property
    def active_count(self):
        return sum(s is not BoundStatus.FREE for s in self.pattern)


def solve_qp_exact(qp, tol=1e-9):
    """Try every lower/free/upper pattern and keep the ones satisfying the KKT conditions.

    For each pattern the free block solves ``H_FF x_F = -(b_F + H_FB x_B)``;
    the candidate passes if ``x_F`` lies in the box and the gradient on bound
    variables has the right sign (``>= 0`` at lower, ``<= 0`` at upper).
    Feasibility and sign checks use ``tol`` scaled by the data magnitude.
    Ties go to the lowest objective, then the lexicographically first pattern.
    """
    m = qp.dim
    if m > MAX_ORACLE_DIM:
        raise OracleError(f"dimension {m} exceeds the enumeration limit {MAX_ORACLE_DIM}")
    h = qp.dense_hessian()
    b = qp.linear
    lo, hi = qp.box.lower, qp.box.upper
    scale_x = 1.0 + np.maximum(np.abs(lo), np.abs(hi))
    scale_g = 1.0 + np.abs(h).sum(axis=1) * scale_x.max(initial=0.0) + np.abs(b)
    idx = np.arange(m)

    best = None
    passing = 0
    worst_best = np.inf
    for pattern in itertools.product(range(3), repeat=m):
        pat = np.array(pattern, dtype=int)
        free = idx[pat == 1]
        x = np.where(pat == 0, lo, hi).astype(float)
        if free.size:
            bound = idx[pat != 1]
            rhs = -(b[free] + h[np.ix_(free, bound)] @ x[bound])
            try:
                chol = np.linalg.cholesky(h[np.ix_(free, free)])
            except np.linalg.LinAlgError:
                continue
            x[free] = np.linalg.solve(chol.T, np.linalg.solve(chol, rhs))
        g = h @ x + b
        viol = np.zeros(m)
        viol[free] = np.maximum(lo[free] - x[free], x[free] - hi[free]).clip(min=0) / scale_x[free]
        at_lo, at_hi = pat == 0, pat == 2
        viol[at_lo] = np.maximum(0.0, -g[at_lo]) / scale_g[at_lo]
        viol[at_hi] = np.maximum(0.0, g[at_hi]) / scale_g[at_hi]
        worst = float(viol.max()) if m else 0.0
        if worst > tol:
            worst_best = min(worst_best, worst)
            continue
        passing += 1
        x = np.clip(x, lo, hi)
        f = qp.objective(x)
        if best is None or f < best[0] - 1e-14 * (1 + abs(f)):
            best = (f, x, pattern)
    if best is None:
        raise OracleError(f"no pattern satisfies the KKT conditions; best violation {worst_best:.3e}")
    f, x, pattern = best
    return OracleSolution(x, float(f), tuple(_ORDER[s] for s in pattern), passing)
