"""Logarithmic-barrier interior-point reference solver for box constraints."""

from dataclasses import dataclass

import numpy as np

from .mb_solver import OuterTrace, SolveReport, Termination
from .model import count_active, projected_gradient_residual
from .newton import (
    DEFAULT_ETA,
    InnerSolveError,
    InnerStop,
    InnerTolerances,
    LineSearchConfig,
    NewtonWorkspace,
    newton_minimize,
)

FRACTION_TO_BOUNDARY = 0.995
INTERIOR_NUDGE = 1e-3


class DomainError(ValueError):
    """The log barrier was evaluated at a point that is not strictly interior."""


@dataclass(frozen=True)
class LogBarrierConfig:
    nu0: float = 1.0 / 2**5
    nu_shrink: float = 2.0
    nu_min: float = 2.0**-40
    eps_g: float = 1e-4
    max_outer: int = 50_000
    eta: float = DEFAULT_ETA
    inner: InnerTolerances = InnerTolerances()
    line_search: LineSearchConfig = LineSearchConfig()

    def __post_init__(self):
        if not self.nu0 > 0:
            raise ValueError("nu0 must be positive")
        if not self.nu_shrink > 1:
            raise ValueError("nu_shrink must exceed 1")
        if not 0 < self.nu_min <= self.nu0:
            raise ValueError("nu_min must lie in (0, nu0]")
        if not self.eps_g > 0 or self.max_outer < 1:
            raise ValueError("eps_g and max_outer must be positive")

    @classmethod
    def matching(cls, mb_cfg):
        """Schedule mirroring a monomial-barrier config: ``nu = 1/mu``."""
        return cls(
            nu0=1.0 / mb_cfg.mu0,
            nu_shrink=float(mb_cfg.tau),
            nu_min=1.0 / mb_cfg.mu_max,
            eps_g=mb_cfg.eps_g,
            max_outer=mb_cfg.max_outer,
            eta=mb_cfg.eta,
            inner=mb_cfg.inner,
            line_search=mb_cfg.line_search,
        )


def _slacks(x, box):
    return x - box.lower, box.upper - x


def log_barrier_eval(x, nu, problem):
    """``f(x) - nu * sum(log(x - l) + log(u - x))`` with gradient and Hessian diagonal.

    Returns ``(value, gradient, hess_diag)`` where ``gradient`` is the full
    gradient and ``hess_diag`` only the barrier part.
    """
    x = np.asarray(x, dtype=float)
    sl, su = _slacks(x, problem.box)
    if not (np.all(sl > 0) and np.all(su > 0)):
        raise DomainError("log barrier needs a strictly interior point")
    value = problem.objective(x) - nu * float(np.sum(np.log(sl) + np.log(su)))
    grad = problem.gradient(x) - nu * (1.0 / sl - 1.0 / su)
    diag = nu * (1.0 / sl**2 + 1.0 / su**2)
    return value, grad, diag


class LogMerit:
    def __init__(self, problem, nu):
        self.problem = problem
        self.nu = nu

    def value(self, x):
        sl, su = _slacks(x, self.problem.box)
        if not (np.all(sl > 0) and np.all(su > 0)):
            return np.inf
        return log_barrier_eval(x, self.nu, self.problem)[0]

    def derivatives(self, x):
        value, grad, diag = log_barrier_eval(x, self.nu, self.problem)
        return value, grad, self.problem.hessian(x), diag


def max_interior_step(box, fraction=FRACTION_TO_BOUNDARY):
    """Largest ``alpha`` keeping ``x + alpha p`` a fraction of the slack inside the box."""

    def cap(x, p):
        sl, su = _slacks(x, box)
        alpha = np.inf
        down = p < 0
        if np.any(down):
            alpha = min(alpha, float(np.min(fraction * sl[down] / -p[down])))
        up = p > 0
        if np.any(up):
            alpha = min(alpha, float(np.min(fraction * su[up] / p[up])))
        return alpha

    return cap


def interior_start(box, x0=None):
    """Default or user start pulled at least ``1e-3 * q`` inside the box."""
    if x0 is None:
        return box.center.copy()
    x = np.array(x0, dtype=float)
    margin = INTERIOR_NUDGE * box.half_width
    return np.clip(x, box.lower + margin, box.upper - margin)


def minimize_log_barrier(problem, nu, x0, tol=InnerTolerances(), ls=LineSearchConfig(),
                         eta=DEFAULT_ETA, workspace=None):
    """Newton minimization of the log barrier at a fixed ``nu`` from an interior ``x0``."""
    ws = NewtonWorkspace() if workspace is None else workspace
    return newton_minimize(x0, LogMerit(problem, nu), tol, ls, eta, ws,
                           max_step=max_interior_step(problem.box))


def solve_ip(problem, x0=None, cfg=LogBarrierConfig()):
    """Follow the central path ``nu_k -> 0``, warm-starting each ``nu`` from the last.

    Stops when the projected gradient is below ``cfg.eps_g`` or the next
    ``nu`` would fall below ``cfg.nu_min`` (reported as ``muExceeded``).
    ``mu_final`` holds the last ``nu``.
    """
    box = problem.box
    m = problem.dim
    if m == 0:
        x = np.zeros(0)
        return SolveReport(x, float(problem.objective(x)), 0.0, 0, 0, 0,
                           Termination.PROJ_GRAD_MET, cfg.nu0)
    if np.any(box.half_width <= 0):
        raise ValueError("interior-point solve needs l < u for every variable")
    x = interior_start(box, x0)
    workspace = NewtonWorkspace()
    nu = cfg.nu0
    trace = []
    inner_total = 0
    residual = projected_gradient_residual(x, problem)
    termination = Termination.MAX_OUTER
    message = ""
    for k in range(cfg.max_outer):
        try:
            res = minimize_log_barrier(problem, nu, x, cfg.inner, cfg.line_search,
                                       cfg.eta, workspace)
        except InnerSolveError as exc:
            inner_total += exc.iterations
            x = exc.x
            residual = projected_gradient_residual(x, problem)
            termination = Termination.INNER_FAILURE
            message = str(exc)
            trace.append(OuterTrace(nu, exc.iterations, float("nan"), residual,
                                    InnerStop.LINE_SEARCH_FAILED))
            break
        inner_total += res.iterations
        x = res.x
        residual = projected_gradient_residual(x, problem)
        trace.append(OuterTrace(nu, res.iterations, res.value, residual, res.reason))
        if res.reason is InnerStop.LINE_SEARCH_FAILED:
            termination = Termination.INNER_FAILURE
            message = f"line search failed at nu={nu:g}"
            break
        if residual < cfg.eps_g:
            termination = Termination.PROJ_GRAD_MET
            break
        nu_next = nu / cfg.nu_shrink
        if nu_next < cfg.nu_min:
            termination = Termination.MU_EXCEEDED
            break
        nu = nu_next
    return SolveReport(
        x=x,
        f_value=float(problem.objective(x)),
        proj_grad_residual=residual,
        outer_iterations=len(trace),
        inner_iterations_total=inner_total,
        active_count=count_active(x, box),
        termination=termination,
        mu_final=nu,
        trace=trace,
        message=message,
    )
