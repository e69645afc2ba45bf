"""Outer loop of the monomial barrier method."""

import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction

import numpy as np

from .barrier import ScaledBox
from .model import count_active, project, projected_gradient_residual
from .newton import (
    DEFAULT_ETA,
    InnerSolveError,
    InnerStop,
    InnerTolerances,
    LineSearchConfig,
    NewtonWorkspace,
    inner_solve,
)

__all__ = [
    "BarrierConfig",
    "SolveReport",
    "Termination",
    "OuterTrace",
    "project",
    "solve_mb",
    "predict_outer_iterations",
    "min_outer_index",
]


class Termination(Enum):
    PROJ_GRAD_MET = "projGradMet"
    MU_EXCEEDED = "muExceeded"
    MAX_OUTER = "maxOuter"
    INNER_FAILURE = "innerFailure"


@dataclass(frozen=True)
class BarrierConfig:
    mu0: int = 2**5
    mu_max: float = 2.0**40
    tau: int = 2
    eps_g: float = 1e-4
    max_outer: int = 50_000
    eta: float = DEFAULT_ETA
    inner: InnerTolerances = InnerTolerances()
    line_search: LineSearchConfig = LineSearchConfig()

    def __post_init__(self):
        if int(self.mu0) != self.mu0 or self.mu0 < 2 or int(self.mu0) % 2:
            raise ValueError(f"mu0 must be an even integer >= 2, got {self.mu0}")
        if int(self.tau) != self.tau or self.tau < 2:
            raise ValueError(f"tau must be an integer >= 2, got {self.tau}")
        if not self.mu_max >= self.mu0:
            raise ValueError("mu_max must be at least mu0")
        if not self.eps_g > 0:
            raise ValueError("eps_g must be positive")
        if self.max_outer < 1:
            raise ValueError("max_outer must be positive")
        if self.eta < 0:
            raise ValueError("eta must be nonnegative")


@dataclass(frozen=True)
class OuterTrace:
    mu: float
    inner_iterations: int
    barrier_value: float
    residual: float
    inner_reason: InnerStop


@dataclass
class SolveReport:
    x: np.ndarray
    f_value: float
    proj_grad_residual: float
    outer_iterations: int
    inner_iterations_total: int
    active_count: int
    termination: Termination
    mu_final: float
    trace: list = field(default_factory=list)
    message: str = ""


def solve_mb(problem, x0=None, cfg=BarrierConfig(), weight=None):
    """Minimize a convex function over a box with the monomial barrier.

    Each outer iteration minimizes ``P(.; mu_k)`` by Newton's method starting
    from the previous projected iterate, projects the result onto the box
    and stops once the projected gradient falls below ``cfg.eps_g`` or the
    next ``mu`` would exceed ``cfg.mu_max``.

    Parameters
    ----------
    problem : Problem
        Objective and box; every half-width must be positive.
    x0 : array_like, optional
        Starting point, feasible or not. Defaults to the box center.
    cfg : BarrierConfig
    weight : float, optional
        Barrier coefficient; defaults to ``1/m``.

    Returns
    -------
    SolveReport
        ``x`` is always the projected (feasible) iterate.
    """
    box = problem.box
    m = problem.dim
    if m == 0:
        x = np.zeros(0)
        return SolveReport(x, float(problem.objective(x)), 0.0, 0, 0, 0,
                           Termination.PROJ_GRAD_MET, float(cfg.mu0))
    sb = ScaledBox.from_box(box)
    x_start = box.center.copy() if x0 is None else np.array(x0, dtype=float)
    if x_start.shape != (m,) or not np.all(np.isfinite(x_start)):
        raise ValueError("x0 must be a finite vector of the problem dimension")

    workspace = NewtonWorkspace()
    mu = int(cfg.mu0)
    trace = []
    inner_total = 0
    x_proj = project(x_start, box)
    residual = projected_gradient_residual(x_proj, problem)
    termination = Termination.MAX_OUTER
    message = ""
    for k in range(cfg.max_outer):
        try:
            res = inner_solve(x_start, mu, problem, sb, cfg.inner, cfg.line_search,
                              cfg.eta, workspace, weight)
        except InnerSolveError as exc:
            inner_total += exc.iterations
            x_proj = project(exc.x, box)
            residual = projected_gradient_residual(x_proj, problem)
            termination = Termination.INNER_FAILURE
            message = str(exc)
            trace.append(OuterTrace(mu, exc.iterations, float("nan"), residual,
                                    InnerStop.LINE_SEARCH_FAILED))
            break
        inner_total += res.iterations
        x_proj = project(res.x, box)
        residual = projected_gradient_residual(x_proj, problem)
        trace.append(OuterTrace(mu, res.iterations, res.value, residual, res.reason))
        if res.reason is InnerStop.LINE_SEARCH_FAILED:
            termination = Termination.INNER_FAILURE
            message = f"line search failed at mu={mu}"
            break
        mu_next = mu * int(cfg.tau)
        if residual < cfg.eps_g:
            termination = Termination.PROJ_GRAD_MET
            break
        if mu_next > cfg.mu_max:
            termination = Termination.MU_EXCEEDED
            break
        x_start = x_proj
        mu = mu_next
    return SolveReport(
        x=x_proj,
        f_value=float(problem.objective(x_proj)),
        proj_grad_residual=residual,
        outer_iterations=len(trace),
        inner_iterations_total=inner_total,
        active_count=count_active(x_proj, box),
        termination=termination,
        mu_final=float(mu),
        trace=trace,
        message=message,
    )


def _check_predict_args(mu0, tau, eps_f):
    if int(mu0) != mu0 or mu0 < 2 or int(mu0) % 2:
        raise ValueError("mu0 must be an even integer >= 2")
    if int(tau) != tau or tau < 2:
        raise ValueError("tau must be an integer >= 2")
    if not 0.0 < eps_f < 1.0:
        raise ValueError("eps_f must lie in (0, 1)")


def min_outer_index(mu0, tau, eps_f):
    """Smallest ``n >= 0`` with ``2 / (tau**n * mu0) <= eps_f``.

    Evaluated in exact rational arithmetic so that powers of two land on the
    right integer.
    """
    _check_predict_args(mu0, tau, eps_f)
    eps = Fraction(eps_f)
    guess = max(0, math.floor(math.log(2.0 / (mu0 * eps_f)) / math.log(tau)) - 1)
    n = guess
    while Fraction(2, int(mu0) * int(tau) ** n) > eps:
        n += 1
    while n > 0 and Fraction(2, int(mu0) * int(tau) ** (n - 1)) <= eps:
        n -= 1
    return n


def predict_outer_iterations(mu0, tau, eps_f):
    """Number of outer iterations needed for relative function accuracy ``eps_f``.

    Outer indices run ``k = 0..n`` so the count is ``min_outer_index + 1``;
    for ``mu0 = 2**5, tau = 2, eps_f = 2**-20`` this is 17.
    """
    return min_outer_index(mu0, tau, eps_f) + 1
