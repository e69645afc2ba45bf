"""Benchmark problem families, the QPBOX problem file format and suite reports."""

import csv
import io
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .logbarrier import LogBarrierConfig, solve_ip
from .mb_solver import BarrierConfig, solve_mb
from .model import (
    Box,
    QuadraticProblem,
    count_active,
    presolve_fixed,
    projected_gradient_residual,
)
from .oracle import MAX_ORACLE_DIM, solve_qp_exact

FORMAT_VERSION = 1
CSV_COLUMNS = (
    "problem", "n", "nnz", "solver", "outer_iters", "active",
    "elapsed_s", "f_value", "proj_grad", "reason",
)
SOLVERS = ("MB", "IP", "oracle")


# --------------------------------------------------------------------------
# generators


def gen_diag_qp(m, seed, bound_scale=1.0, placement="mixed"):
    """Diagonal convex QP with random bounds and a chosen minimizer placement.

    ``placement`` puts the unconstrained minimizer, in scaled coordinates
    ``z = (x - r) / q``, inside ``[-0.9, 0.9]`` ("interior"), beyond every
    bound with ``1.5 <= |z| <= 3`` ("exterior"), or anywhere in ``[-2, 2]``
    ("mixed").  ``bound_scale`` multiplies box centers and widths.
    """
    if m < 1:
        raise ValueError("m must be positive")
    rng = np.random.default_rng(seed)
    h = rng.uniform(1.0, 10.0, m)
    centers = rng.uniform(-1.0, 1.0, m) * bound_scale
    half = rng.uniform(0.5, 1.5, m) * bound_scale
    if placement == "interior":
        z = rng.uniform(-0.9, 0.9, m)
    elif placement == "exterior":
        z = rng.choice([-1.0, 1.0], m) * rng.uniform(1.5, 3.0, m)
    elif placement == "mixed":
        z = rng.uniform(-2.0, 2.0, m)
    else:
        raise ValueError(f"unknown placement {placement!r}")
    x_free = centers + half * z
    idx = np.arange(m)
    return QuadraticProblem(idx, idx, h, -h * x_free, Box(centers - half, centers + half))


def diag_closed_form(qp):
    """Exact minimizer of a diagonal QP: ``clip(-b_i / H_ii, l_i, u_i)``."""
    if not np.array_equal(qp.rows, qp.cols) or qp.nnz != qp.dim:
        raise ValueError("Hessian is not diagonal with a full diagonal")
    d = np.zeros(qp.dim)
    d[qp.rows] = qp.vals
    return np.clip(-qp.linear / d, qp.box.lower, qp.box.upper)


def gen_random_qp(m, seed):
    """Dense strictly convex QP: ``H = M^T M + I`` with standard normal ``M`` and ``b``."""
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((m, m))
    h = a.T @ a + np.eye(m)
    b = rng.standard_normal(m)
    centers = rng.uniform(-1.0, 1.0, m)
    half = rng.uniform(0.25, 1.5, m)
    return QuadraticProblem.from_dense(h, b, Box(centers - half, centers + half))


Field = Union[float, Callable[[np.ndarray, np.ndarray], np.ndarray]]


def _default_lower(s, t):
    return (np.sin(9.2 * np.pi * s) * np.sin(9.3 * np.pi * t)) ** 3


def _default_upper(s, t):
    return (np.sin(9.2 * np.pi * s) * np.sin(9.3 * np.pi * t)) ** 2 + 0.02


@dataclass(frozen=True)
class ObstacleSpec:
    """Obstacles and load for :func:`gen_obstacle_qp`.

    ``lower`` and ``upper`` are constants or functions of the grid
    coordinates ``(s, t)`` in (0, 1).  The defaults are the oscillating
    ``sin(9.2 pi s) sin(9.3 pi t)`` pair (cubed below, squared plus 0.02
    above); ``load`` is the constant force on the membrane.
    """

    lower: Field = _default_lower
    upper: Field = _default_upper
    load: float = 1.0


def _field(spec, s, t):
    if callable(spec):
        return np.asarray(spec(s, t), dtype=float) * np.ones_like(s)
    return np.full_like(s, float(spec))


def gen_obstacle_qp(grid_side, obstacle=ObstacleSpec()):
    """Membrane between two obstacles on a ``grid_side x grid_side`` interior grid.

    ``H`` is the 5-point Laplacian stencil (4 on the diagonal, -1 per
    neighbour) and ``b = -h^2 * load`` with ``h = 1 / (grid_side + 1)``.
    """
    n = int(grid_side)
    if n < 2:
        raise ValueError("grid_side must be at least 2")
    h = 1.0 / (n + 1)
    m = n * n
    idx = np.arange(m)
    col_i, row_i = idx % n, idx // n
    rows = [idx]
    cols = [idx]
    vals = [np.full(m, 4.0)]
    west = idx[col_i > 0]
    rows.append(west), cols.append(west - 1), vals.append(np.full(west.size, -1.0))
    south = idx[row_i > 0]
    rows.append(south), cols.append(south - n), vals.append(np.full(south.size, -1.0))
    s = (col_i + 1) * h
    t = (row_i + 1) * h
    lower = _field(obstacle.lower, s, t)
    upper = _field(obstacle.upper, s, t)
    return QuadraticProblem(
        np.concatenate(rows), np.concatenate(cols), np.concatenate(vals),
        np.full(m, -h * h * obstacle.load), Box(lower, upper),
    )


# --------------------------------------------------------------------------
# problem files


class ProblemFileError(ValueError):
    def __init__(self, line, message):
        self.line = line
        super().__init__(f"line {line}: {message}")


def _fmt(v):
    return repr(float(v))


def serialize_problem(qp):
    """Text form of a :class:`QuadraticProblem`; ``parse_problem`` inverts it exactly."""
    out = [
        f"QPBOX {FORMAT_VERSION} {qp.dim} {qp.nnz}",
        " ".join(["L"] + [_fmt(v) for v in qp.box.lower]),
        " ".join(["U"] + [_fmt(v) for v in qp.box.upper]),
        " ".join(["B"] + [_fmt(v) for v in qp.linear]),
        f"C {_fmt(qp.constant)}",
    ]
    out += [f"H {r} {c} {_fmt(v)}" for r, c, v in zip(qp.rows, qp.cols, qp.vals)]
    return ("\n".join(out) + "\n").encode("utf-8")


def _reals(tokens, lineno, what):
    try:
        vals = np.array([float(tok) for tok in tokens], dtype=float)
    except ValueError as exc:
        raise ProblemFileError(lineno, f"bad number in {what}: {exc}") from None
    if not np.all(np.isfinite(vals)):
        raise ProblemFileError(lineno, f"non-finite value in {what}")
    return vals


def parse_problem(data):
    """Parse a QPBOX file (bytes or str); errors carry 1-based line numbers."""
    text = data.decode("utf-8") if isinstance(data, (bytes, bytearray)) else data
    lines = text.splitlines()
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines:
        raise ProblemFileError(1, "empty file")
    head = lines[0].split()
    if len(head) != 4 or head[0] != "QPBOX":
        raise ProblemFileError(1, "expected header 'QPBOX <version> <m> <nnz>'")
    try:
        version, m, nnz = (int(tok) for tok in head[1:])
    except ValueError:
        raise ProblemFileError(1, "header fields must be integers") from None
    if version != FORMAT_VERSION:
        raise ProblemFileError(1, f"unsupported format version {version}")
    if m < 0 or nnz < 0:
        raise ProblemFileError(1, "negative size in header")
    if len(lines) < 5 + nnz:
        raise ProblemFileError(len(lines) + 1, f"unexpected end of file, expected {5 + nnz} lines")
    if len(lines) > 5 + nnz:
        raise ProblemFileError(6 + nnz, f"extra content after {nnz} Hessian entries")

    def vector(lineno, tag):
        toks = lines[lineno - 1].split()
        if not toks or toks[0] != tag:
            raise ProblemFileError(lineno, f"expected '{tag}' line")
        vals = _reals(toks[1:], lineno, tag)
        if vals.size != m:
            raise ProblemFileError(lineno, f"'{tag}' needs {m} values, found {vals.size}")
        return vals

    lower = vector(2, "L")
    upper = vector(3, "U")
    bad = np.flatnonzero(lower > upper)
    if bad.size:
        raise ProblemFileError(3, f"lower bound exceeds upper bound at index {bad[0]}")
    linear = vector(4, "B")
    toks = lines[4].split()
    if len(toks) != 2 or toks[0] != "C":
        raise ProblemFileError(5, "expected 'C <real>'")
    constant = float(_reals(toks[1:], 5, "C")[0])

    rows = np.empty(nnz, dtype=np.int64)
    cols = np.empty(nnz, dtype=np.int64)
    vals = np.empty(nnz)
    prev = None
    for k in range(nnz):
        lineno = 6 + k
        toks = lines[lineno - 1].split()
        if len(toks) != 4 or toks[0] != "H":
            raise ProblemFileError(lineno, "expected 'H <row> <col> <value>'")
        try:
            r, c = int(toks[1]), int(toks[2])
        except ValueError:
            raise ProblemFileError(lineno, "Hessian indices must be integers") from None
        if not (0 <= r < m and 0 <= c < m):
            raise ProblemFileError(lineno, f"Hessian index ({r}, {c}) out of range")
        if c > r:
            raise ProblemFileError(lineno, f"upper-triangle Hessian entry ({r}, {c})")
        if prev is not None and (r, c) <= prev:
            what = "duplicate" if (r, c) == prev else "unsorted"
            raise ProblemFileError(lineno, f"{what} Hessian entry ({r}, {c})")
        prev = (r, c)
        rows[k], cols[k] = r, c
        vals[k] = _reals(toks[3:], lineno, "H")[0]
    return QuadraticProblem(rows, cols, vals, linear, Box(lower, upper), constant)


def load_problem(path):
    with open(path, "rb") as fh:
        return parse_problem(fh.read())


def save_problem(qp, path):
    with open(path, "wb") as fh:
        fh.write(serialize_problem(qp))


# --------------------------------------------------------------------------
# suites


@dataclass(frozen=True)
class BenchRecord:
    problem: str
    n: int
    nnz: int
    solver: str
    outer_iters: int
    active: int
    elapsed_s: float
    f_value: float
    proj_grad: float
    reason: str
    x: np.ndarray = None

    def row(self):
        return [
            self.problem, str(self.n), str(self.nnz), self.solver,
            str(self.outer_iters), str(self.active), _sci(self.elapsed_s),
            _sci(self.f_value), _sci(self.proj_grad), self.reason,
        ]


def _sci(v):
    return "nan" if not math.isfinite(v) else f"{v:.5e}"


def run_one(name, qp, solver, mb_cfg=BarrierConfig(), ip_cfg=None):
    """Solve one problem with one solver; failures become records, never exceptions."""
    ip_cfg = LogBarrierConfig.matching(mb_cfg) if ip_cfg is None else ip_cfg
    pre = presolve_fixed(qp)
    reduced = pre.reduced
    try:
        if solver == "MB":
            t0 = time.perf_counter()
            rep = solve_mb(reduced.problem, cfg=mb_cfg)
            elapsed = time.perf_counter() - t0
            x_red, outer, reason = rep.x, rep.outer_iterations, rep.termination.value
        elif solver == "IP":
            t0 = time.perf_counter()
            rep = solve_ip(reduced.problem, cfg=ip_cfg)
            elapsed = time.perf_counter() - t0
            x_red, outer, reason = rep.x, rep.outer_iterations, rep.termination.value
        elif solver == "oracle":
            t0 = time.perf_counter()
            sol = solve_qp_exact(reduced)
            elapsed = time.perf_counter() - t0
            x_red, outer, reason = sol.x, 0, "exact"
        else:
            raise ValueError(f"unknown solver {solver!r}")
    except Exception as exc:  # recorded, the suite keeps going
        nan = float("nan")
        return BenchRecord(name, qp.dim, qp.nnz, solver, 0, 0, nan, nan, nan,
                           f"error: {type(exc).__name__}: {exc}")
    x = pre.recombine(x_red)
    return BenchRecord(
        name, qp.dim, qp.nnz, solver, outer, count_active(x, qp.box), elapsed,
        qp.objective(x), projected_gradient_residual(x, qp.problem), reason, x,
    )


def suite_threads():
    try:
        return max(1, int(os.environ.get("MONOBAR_THREADS", "1")))
    except ValueError:
        return 1


def run_suite(problems, solvers=("MB", "IP"), mb_cfg=BarrierConfig(), ip_cfg=None, threads=None):
    """Run every (problem, solver) pair; records come back sorted by (problem, n, solver).

    The oracle is skipped for problems above its dimension limit.
    """
    for s in solvers:
        if s not in SOLVERS:
            raise ValueError(f"unknown solver {s!r}")
    jobs = [
        (name, qp, s)
        for name, qp in problems
        for s in solvers
        if not (s == "oracle" and presolve_fixed(qp).reduced.dim > MAX_ORACLE_DIM)
    ]
    threads = suite_threads() if threads is None else threads
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(lambda j: run_one(*j, mb_cfg, ip_cfg), jobs))
    else:
        records = [run_one(*j, mb_cfg, ip_cfg) for j in jobs]
    return sorted(records, key=lambda r: (r.problem, r.n, r.solver))


def records_to_csv(records):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for rec in records:
        writer.writerow(rec.row())
    return buf.getvalue()


def write_csv(records, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(records_to_csv(records))

