"""Monomial-barrier solver for box-constrained convex optimization."""

from .barrier import ScaledBox, barrier_eval, barrier_eval_scaled, safe_even_power
from .bench import (
    BenchRecord,
    ObstacleSpec,
    ProblemFileError,
    diag_closed_form,
    gen_diag_qp,
    gen_obstacle_qp,
    gen_random_qp,
    load_problem,
    parse_problem,
    run_one,
    run_suite,
    save_problem,
    serialize_problem,
    write_csv,
)
from .logbarrier import LogBarrierConfig, log_barrier_eval, solve_ip
from .mb_solver import (
    BarrierConfig,
    SolveReport,
    Termination,
    min_outer_index,
    predict_outer_iterations,
    solve_mb,
)
from .model import (
    BoundStatus,
    Box,
    KKTReport,
    Problem,
    QuadraticProblem,
    count_active,
    kkt_report,
    presolve_fixed,
    project,
    projected_gradient_residual,
)
from .newton import InnerTolerances, LineSearchConfig, armijo_backtrack, inner_solve, newton_direction
from .oracle import OracleError, solve_qp_exact

__version__ = "0.1.0"
