"""Newton inner iterations: SPD solves, Armijo backtracking and stopping tests."""

from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from .barrier import SATURATION_CAP, barrier_eval
from .cholesky import FactorizationError, SparseCholesky, lower_csc

DEFAULT_ETA = 1e-15
MAX_ETA = 1e-8
MAX_ETA_RETRIES = 24


@dataclass(frozen=True)
class LineSearchConfig:
    rho: float = 0.5
    c: float = 1e-4
    max_backtracks: int = 60

    def __post_init__(self):
        if not 0.0 < self.rho < 1.0:
            raise ValueError("rho must lie in (0, 1)")
        if not 0.0 < self.c < 1.0:
            raise ValueError("c must lie in (0, 1)")
        if self.max_backtracks < 1:
            raise ValueError("max_backtracks must be positive")


@dataclass(frozen=True)
class InnerTolerances:
    eps_grad: float = 1e-4
    eps_f: float = 1e-8
    eps_x: float = 1e-8
    max_inner: int = 200

    def __post_init__(self):
        if min(self.eps_grad, self.eps_f, self.eps_x) <= 0:
            raise ValueError("inner tolerances must be positive")
        if self.max_inner < 1:
            raise ValueError("max_inner must be positive")


class InnerStop(Enum):
    GRAD_SMALL = "gradSmall"
    FUNC_STALLED = "funcStalled"
    STEP_STALLED = "stepStalled"
    MAX_INNER = "maxInner"
    LINE_SEARCH_FAILED = "lineSearchFailed"


@dataclass
class InnerResult:
    x: np.ndarray
    iterations: int
    line_search_evaluations: int
    reason: InnerStop
    value: float
    grad_norm: float
    factorizations: int = 0


class LineSearchError(RuntimeError):
    """Backtracking exhausted without sufficient decrease; carries the best point seen."""

    def __init__(self, x_best, value_best, evaluations):
        self.x_best = x_best
        self.value_best = value_best
        self.evaluations = evaluations
        super().__init__(f"no sufficient decrease after {evaluations} trial steps")


class InnerSolveError(RuntimeError):
    """A Newton system could not be factorized; ``x`` is the last accepted iterate."""

    def __init__(self, x, iterations, cause):
        self.x = x
        self.iterations = iterations
        self.cause = cause
        super().__init__(f"inner solve failed after {iterations} iterations: {cause}")


class NewtonWorkspace:
    """Factorization workspace for ``(H + diag(d)) p = -g``.

    The sparsity pattern of ``H`` plus the diagonal is analysed on the first
    call and reused afterwards. Not safe to share between concurrent solves.
    """

    def __init__(self, ordering="rcm"):
        self.ordering = ordering
        self.chol = None
        self.factorizations = 0
        self._h_indptr = None
        self._h_indices = None

    def _analyze(self, h):
        n = h.shape[0]
        self._h_indptr = h.indptr.copy()
        self._h_indices = h.indices.copy()
        hcols = np.repeat(np.arange(n), np.diff(h.indptr))
        hkeys = hcols.astype(np.int64) * n + h.indices
        dkeys = np.arange(n, dtype=np.int64) * (n + 1)
        keys = np.union1d(hkeys, dkeys)
        self._hpos = np.searchsorted(keys, hkeys)
        self._dpos = np.searchsorted(keys, dkeys)
        self._nnz = keys.size
        rows, cols = keys % n, keys // n
        pattern = sp.csc_matrix((np.ones(keys.size), (rows, cols)), shape=(n, n))
        self.chol = SparseCholesky(pattern, ordering=self.ordering)

    def factorize(self, hess_lower, diag):
        """Factorize ``tril(H) + diag(diag)``; raises :class:`FactorizationError`."""
        h = hess_lower
        if not (sp.isspmatrix_csc(h) and h.has_sorted_indices and h.has_canonical_format):
            h = lower_csc(h)
        if self.chol is None:
            self._analyze(h)
        elif not (
            np.array_equal(h.indptr, self._h_indptr) and np.array_equal(h.indices, self._h_indices)
        ):
            raise ValueError("Hessian sparsity pattern changed between calls")
        values = np.zeros(self._nnz)
        np.add.at(values, self._hpos, h.data)
        values[self._dpos] += diag
        self.factorizations += 1
        self.chol.factorize_values(values)

    def solve(self, rhs):
        return self.chol.solve(rhs)


def newton_direction(grad_p, hess_f, hess_diag, eta=DEFAULT_ETA, workspace=None):
    """Solve ``(hess_f + diag(hess_diag) + eta I) p = -grad_p`` by sparse Cholesky.

    ``hess_f`` may be dense or sparse; only its lower triangle is read.
    """
    grad_p = np.asarray(grad_p, dtype=float)
    ws = NewtonWorkspace() if workspace is None else workspace
    h = lower_csc(sp.csc_matrix(hess_f)) if not sp.issparse(hess_f) else hess_f
    ws.factorize(h, np.asarray(hess_diag, dtype=float) + eta)
    return ws.solve(-grad_p)


def regularized_direction(grad_p, hess_f, hess_diag, eta, workspace,
                          eta_max=MAX_ETA, max_retries=MAX_ETA_RETRIES):
    """Newton direction with the shift doubled after each failed factorization."""
    shift = eta
    for attempt in range(max_retries + 1):
        try:
            return newton_direction(grad_p, hess_f, hess_diag, shift, workspace), shift
        except FactorizationError:
            if attempt == max_retries or shift >= eta_max:
                raise
            shift = min(2.0 * shift, max(eta_max, eta)) if shift > 0 else DEFAULT_ETA


class LineSearchResult(NamedTuple):
    alpha: float
    x: np.ndarray
    value: float
    evaluations: int


def armijo_backtrack(x, p, value_fn, grad, cfg=LineSearchConfig(), value=None, alpha0=1.0):
    """Backtracking along ``p`` until ``P(x + a p) <= P(x) + c a grad.p``.

    Tries ``alpha0, rho*alpha0, rho**2*alpha0, ...``.
    """
    x = np.asarray(x, dtype=float)
    slope = float(np.dot(grad, p))
    if not slope < 0.0:
        raise ValueError("p is not a descent direction")
    p0 = value_fn(x) if value is None else value
    alpha = alpha0
    best_x, best_val = x, p0
    for k in range(cfg.max_backtracks + 1):
        trial = x + alpha * p
        val = value_fn(trial)
        if val <= p0 + cfg.c * alpha * slope:
            return LineSearchResult(alpha, trial, val, k + 1)
        if val < best_val:
            best_x, best_val = trial, val
        alpha *= cfg.rho
    raise LineSearchError(best_x, best_val, cfg.max_backtracks + 1)


def newton_minimize(x0, merit, tol, ls, eta, workspace, max_step=None):
    """Damped Newton on a merit object exposing ``value(x)`` and ``derivatives(x)``.

    ``derivatives`` returns ``(value, grad, hess_lower, diag)``.  ``max_step``
    optionally caps the initial trial step (interior-point safeguard).
    """
    x = np.array(x0, dtype=float)
    evals = 0
    factorizations = 0
    value, grad, hess, diag = merit.derivatives(x)
    gnorm = float(np.max(np.abs(grad))) if grad.size else 0.0
    for j in range(tol.max_inner):
        if gnorm <= tol.eps_grad:
            return InnerResult(x, j, evals, InnerStop.GRAD_SMALL, value, gnorm, factorizations)
        try:
            p, _ = regularized_direction(grad, hess, diag, eta, workspace)
            factorizations += 1
        except FactorizationError as exc:
            raise InnerSolveError(x, j, exc) from exc
        if not (np.all(np.isfinite(p)) and np.dot(grad, p) < 0.0):
            p = -grad
        alpha0 = 1.0 if max_step is None else min(1.0, max_step(x, p))
        try:
            step = armijo_backtrack(x, p, merit.value, grad, ls, value, alpha0)
        except LineSearchError as exc:
            evals += exc.evaluations
            return InnerResult(x, j, evals, InnerStop.LINE_SEARCH_FAILED, value, gnorm, factorizations)
        evals += step.evaluations
        x_new = step.x
        new_value, new_grad, new_hess, new_diag = merit.derivatives(x_new)
        f_stall = abs(new_value - value) <= tol.eps_f * (1.0 + abs(value))
        x_stall = np.max(np.abs(x_new - x)) <= tol.eps_x * (1.0 + np.max(np.abs(x)))
        x, value, grad, hess, diag = x_new, new_value, new_grad, new_hess, new_diag
        gnorm = float(np.max(np.abs(grad)))
        if f_stall:
            return InnerResult(x, j + 1, evals, InnerStop.FUNC_STALLED, value, gnorm, factorizations)
        if x_stall:
            return InnerResult(x, j + 1, evals, InnerStop.STEP_STALLED, value, gnorm, factorizations)
    reason = InnerStop.GRAD_SMALL if gnorm <= tol.eps_grad else InnerStop.MAX_INNER
    return InnerResult(x, tol.max_inner, evals, reason, value, gnorm, factorizations)


class MonomialMerit:
    """``P(x; mu)`` for a fixed ``mu`` with the derivative interface used by Newton."""

    def __init__(self, problem, sb, mu, weight=None):
        self.problem = problem
        self.sb = sb
        self.mu = mu
        self.weight = weight
        self.saturated = False

    def value(self, x):
        return barrier_eval(x, self.mu, self.sb, self.problem, self.weight).value

    def derivatives(self, x):
        ev = barrier_eval(x, self.mu, self.sb, self.problem, self.weight)
        self.saturated = ev.saturated
        grad = np.clip(self.problem.gradient(x) + ev.grad_term, -SATURATION_CAP, SATURATION_CAP)
        return ev.value, grad, self.problem.hessian(x), ev.hess_diag


def inner_solve(x0, mu, problem, sb, tol=InnerTolerances(), ls=LineSearchConfig(),
                eta=DEFAULT_ETA, workspace=None, weight=None):
    """Approximately minimize the monomial barrier ``P(.; mu)`` from ``x0``.

    ``x0`` need not be feasible.  Stops on the first of: small barrier
    gradient, stalled barrier value, stalled iterate, iteration cap, or a
    failed line search.
    """
    ws = NewtonWorkspace() if workspace is None else workspace
    merit = MonomialMerit(problem, sb, mu, weight)
    return newton_minimize(x0, merit, tol, ls, eta, ws)
