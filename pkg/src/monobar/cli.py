"""Command-line front end: ``monobar solve|gen|compare|predict``."""

import argparse
import sys
from pathlib import Path

import numpy as np

from .bench import (
    BenchRecord,
    ObstacleSpec,
    ProblemFileError,
    gen_diag_qp,
    gen_obstacle_qp,
    load_problem,
    records_to_csv,
    run_suite,
    save_problem,
    suite_threads,
    write_csv,
)
from .logbarrier import LogBarrierConfig, interior_start, solve_ip
from .mb_solver import (
    BarrierConfig,
    Termination,
    min_outer_index,
    predict_outer_iterations,
    solve_mb,
)
from .model import count_active, presolve_fixed, projected_gradient_residual
from .newton import InnerTolerances

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CAPPED = 2

EXIT_CODES = {
    Termination.PROJ_GRAD_MET: EXIT_OK,
    Termination.MU_EXCEEDED: EXIT_CAPPED,
    Termination.MAX_OUTER: EXIT_CAPPED,
    Termination.INNER_FAILURE: EXIT_FAILURE,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # usage errors share the failure exit code instead of argparse's 2,
    # which is reserved for cap-based stops
    def error(self, message):
        raise UsageError(message)


def exit_code(termination):
    return EXIT_CODES[termination]


def _add_config_flags(p):
    d = BarrierConfig()
    t = InnerTolerances()
    p.add_argument("--mu0", type=int, default=d.mu0, help="initial barrier exponent (even)")
    p.add_argument("--tau", type=int, default=d.tau, help="exponent growth factor")
    p.add_argument("--mu-max", type=float, default=d.mu_max, help="largest exponent")
    p.add_argument("--eps-g", type=float, default=d.eps_g, help="projected-gradient tolerance")
    p.add_argument("--eps-gp", type=float, default=t.eps_grad, help="inner gradient tolerance")
    p.add_argument("--eps-p", type=float, default=t.eps_f, help="inner relative value tolerance")
    p.add_argument("--eps-x", type=float, default=t.eps_x, help="inner relative step tolerance")
    p.add_argument("--max-outer", type=int, default=d.max_outer)
    p.add_argument("--max-inner", type=int, default=t.max_inner)
    p.add_argument("--eta", type=float, default=d.eta, help="Newton diagonal shift")


def build_config(args):
    """``BarrierConfig`` from parsed flags; raises ``ValueError`` on invalid values."""
    inner = InnerTolerances(args.eps_gp, args.eps_p, args.eps_x, args.max_inner)
    return BarrierConfig(
        mu0=args.mu0, mu_max=args.mu_max, tau=args.tau, eps_g=args.eps_g,
        max_outer=args.max_outer, eta=args.eta, inner=inner,
    )


def build_parser():
    parser = _Parser(prog="monobar", description="Monomial-barrier solver for box-constrained QPs.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="solve a problem file")
    p.add_argument("file", type=Path)
    p.add_argument("--solver", choices=("mb", "ip"), default="mb")
    p.add_argument("--x0", default="center",
                   help="'center' or a file of whitespace-separated starting values")
    p.add_argument("--csv", type=Path, help="also write a one-row CSV report here")
    _add_config_flags(p)

    p = sub.add_parser("gen", help="generate a problem file")
    kind = p.add_subparsers(dest="kind", required=True, parser_class=_Parser)
    g = kind.add_parser("diag", help="diagonal QP")
    g.add_argument("--m", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--bound-scale", type=float, default=1.0)
    g.add_argument("--placement", choices=("mixed", "interior", "exterior"), default="mixed")
    g.add_argument("-o", "--output", type=Path, required=True)
    g = kind.add_parser("obstacle", help="obstacle problem on a square grid")
    g.add_argument("--grid-side", type=int, required=True)
    g.add_argument("--load", type=float, default=1.0)
    g.add_argument("-o", "--output", type=Path, required=True)

    p = sub.add_parser("compare", help="run every solver on every *.qp file in a directory")
    p.add_argument("directory", type=Path)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--solvers", default="MB,IP", help="comma list from MB, IP, oracle")
    _add_config_flags(p)

    p = sub.add_parser("predict", help="outer iterations needed for a relative accuracy")
    p.add_argument("--mu0", type=int, default=BarrierConfig().mu0)
    p.add_argument("--tau", type=int, default=BarrierConfig().tau)
    p.add_argument("--eps-f", type=float, required=True)
    return parser


def _read_start(spec, qp, pre):
    if spec == "center":
        return None
    values = np.array(Path(spec).read_text(encoding="utf-8").split(), dtype=float)
    if values.shape != (qp.dim,):
        raise ValueError(f"starting point has {values.size} values, problem has {qp.dim}")
    return pre.restrict(values)


def cmd_solve(args, out):
    cfg = build_config(args)
    qp = load_problem(args.file)
    pre = presolve_fixed(qp)
    reduced = pre.reduced.problem
    x0 = _read_start(args.x0, qp, pre)
    if args.solver == "mb":
        rep = solve_mb(reduced, x0=x0, cfg=cfg)
    else:
        start = interior_start(reduced.box, reduced.box.center if x0 is None else x0)
        if x0 is not None and not np.array_equal(start, x0):
            print("note: starting point moved strictly inside the box", file=out)
        rep = solve_ip(reduced, x0=start, cfg=LogBarrierConfig.matching(cfg))
    x = pre.recombine(rep.x)
    f = qp.objective(x)
    residual = projected_gradient_residual(x, qp.problem)
    active = count_active(x, qp.box)
    print(f"problem:            {args.file}", file=out)
    print(f"solver:             {args.solver.upper()}", file=out)
    print(f"variables:          {qp.dim} ({qp.dim - pre.reduced.dim} fixed)", file=out)
    print(f"f value:            {f:.6e}", file=out)
    print(f"projected gradient: {residual:.6e}", file=out)
    print(f"outer iterations:   {rep.outer_iterations}", file=out)
    print(f"inner iterations:   {rep.inner_iterations_total}", file=out)
    print(f"active bounds:      {active}", file=out)
    print(f"termination:        {rep.termination.value}", file=out)
    if rep.message:
        print(f"message:            {rep.message}", file=out)
    if args.csv is not None:
        rec = BenchRecord(args.file.stem, qp.dim, qp.nnz, args.solver.upper(),
                          rep.outer_iterations, active, float("nan"), f, residual,
                          rep.termination.value)
        write_csv([rec], args.csv)
    return exit_code(rep.termination)


def cmd_gen(args, out):
    if args.kind == "diag":
        qp = gen_diag_qp(args.m, args.seed, args.bound_scale, args.placement)
    else:
        qp = gen_obstacle_qp(args.grid_side, ObstacleSpec(load=args.load))
    save_problem(qp, args.output)
    print(f"wrote {args.output} (n={qp.dim}, nnz={qp.nnz})", file=out)
    return EXIT_OK


def cmd_compare(args, out):
    cfg = build_config(args)
    solvers = tuple(s.strip() for s in args.solvers.split(",") if s.strip())
    files = sorted(args.directory.glob("*.qp"))
    problems = [(f.stem, load_problem(f)) for f in files]
    records = run_suite(problems, solvers, cfg, threads=suite_threads())
    write_csv(records, args.out)
    print(records_to_csv(records), end="", file=out)
    failed = [r for r in records if r.reason not in ("projGradMet", "exact")]
    return EXIT_OK if not failed else EXIT_CAPPED


def cmd_predict(args, out):
    if args.tau <= 1:
        raise ValueError("tau must exceed 1")
    n = min_outer_index(args.mu0, args.tau, args.eps_f)
    print(f"n = {n}", file=out)
    print(f"outer iterations = {predict_outer_iterations(args.mu0, args.tau, args.eps_f)}", file=out)
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "gen": cmd_gen, "compare": cmd_compare, "predict": cmd_predict}


def main(argv=None, out=None, err=None):
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return COMMANDS[args.command](args, out)
    except UsageError as exc:
        print(f"monobar: usage error: {exc}", file=err)
    except ProblemFileError as exc:
        print(f"monobar: {exc}", file=err)
    except (ValueError, OSError) as exc:
        print(f"monobar: error: {exc}", file=err)
    return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
