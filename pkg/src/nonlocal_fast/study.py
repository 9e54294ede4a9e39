"""Convergence studies, timing runs and diagnostics behind the command line."""

from __future__ import annotations

import csv
import io
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .analysis import dominance_report, indefiniteness_scan
from .kernels2d import Grid2D, build_additive, build_multiplicative
from .manufactured import discretize, get_solution
from .pqc import CollocationGrid, assemble_operator
from .solvers import (
    CgsConfig,
    SolverFailure,
    CgsBreakdown,
    TimeStepConfig,
    bdf4_run,
    cgs_solve,
    crank_nicolson_run,
    steady_solve,
)

__all__ = [
    "PROBLEMS",
    "StudySpec",
    "ConvergenceRecord",
    "run_study",
    "records_to_csv",
    "run_timing",
    "TimingResult",
    "run_diagnostics",
    "observed_rates",
]

logger = logging.getLogger(__name__)

CSV_HEADER = ["problem", "gamma", "M", "tau", "error_inf", "rate", "cgs_iters_max", "wall_seconds"]

# problem -> (dimension / kernel, scheme, default solution)
PROBLEMS = {
    "steady1d": ("1d", "steady", "poly1d"),
    "cn1d": ("1d", "cn", "poly1d"),
    "bdf4-1d": ("1d", "bdf4", "poly1d"),
    "cn2d-mult": ("mult", "cn", "mult2d"),
    "bdf4-2d-mult": ("mult", "bdf4", "mult2d"),
    "cn2d-add": ("add", "cn", "add2d-poly"),
    "steady2d-add": ("add", "steady", "add2d-poly"),
}


@dataclass
class StudySpec:
    problem: str
    gammas: list
    Ms: list
    tau: str | float = "equal-h"
    T: float | None = None
    solution: str | None = None
    domain: tuple | None = None
    cgs: CgsConfig = field(default_factory=CgsConfig)
    startup: str = "exact"

    def __post_init__(self):
        if self.problem not in PROBLEMS:
            raise ValueError(f"unknown problem {self.problem!r}; choose from {sorted(PROBLEMS)}")
        kind = PROBLEMS[self.problem][0]
        sol = get_solution(self.solution_id)
        if (kind == "1d") != (sol.dim == 1):
            raise ValueError(f"solution {sol.id!r} does not fit problem {self.problem!r}")
        if self.tau != "equal-h":
            self.tau = float(self.tau)
            if not self.tau > 0:
                raise ValueError("fixed tau must be positive")
        for M in self.Ms:
            if int(M) != M or M < 2:
                raise ValueError(f"M must be an integer >= 2, got {M!r}")
        for g in self.gammas:
            if not 0 < g < 1:
                raise ValueError(f"gamma must lie in (0, 1), got {g!r}")

    @property
    def solution_id(self) -> str:
        return self.solution or PROBLEMS[self.problem][2]

    @property
    def final_time(self) -> float:
        return self.T if self.T is not None else get_solution(self.solution_id).T

    @property
    def bounds(self) -> tuple:
        sol = get_solution(self.solution_id)
        if self.domain is None:
            return sol.domain
        d = tuple(float(v) for v in self.domain)
        if sol.dim == 2 and len(d) == 2:
            d = d + d
        return d


@dataclass
class ConvergenceRecord:
    problem: str
    gamma: float
    M: int
    tau: float
    error_inf: float
    rate: float | None
    cgs_iters_max: int
    wall_seconds: float
    cgs_iters_mean: float = 0.0
    cgs_iters_final: int = 0
    ok: bool = True
    message: str = ""

    def csv_row(self) -> list:
        rate = "" if self.rate is None or not math.isfinite(self.rate) else repr(float(self.rate))
        return [self.problem, repr(float(self.gamma)), str(self.M), repr(float(self.tau)),
                repr(float(self.error_inf)), rate, str(self.cgs_iters_max), f"{self.wall_seconds:.6f}"]


def observed_rates(errors) -> list:
    """``log2(e[k-1] / e[k])`` with ``None`` for the first entry (and undefined ratios)."""
    out = [None]
    for prev, cur in zip(errors[:-1], errors[1:]):
        if prev > 0 and cur > 0 and math.isfinite(prev) and math.isfinite(cur):
            out.append(math.log2(prev / cur))
        else:
            out.append(None)
    return out


def _build(kind, bounds, M, gamma):
    if kind == "1d":
        return assemble_operator(CollocationGrid(bounds[0], bounds[1], M), gamma)
    a, b, c, d = bounds
    grid = Grid2D(CollocationGrid(a, b, M), CollocationGrid(c, d, M))
    return build_multiplicative(grid, gamma) if kind == "mult" else build_additive(grid, gamma)


def _h(op):
    return op.grid.h if hasattr(op.grid, "h") else op.grid.gx.h


def _solve_row(spec: StudySpec, gamma: float, M: int):
    kind, scheme, _ = PROBLEMS[spec.problem]
    sol = get_solution(spec.solution_id)
    t0 = time.perf_counter()
    op = _build(kind, spec.bounds, M, gamma)
    prob = discretize(sol, op)
    tau = _h(op) if spec.tau == "equal-h" else spec.tau
    T = spec.final_time
    if scheme == "steady":
        rep = steady_solve(op, prob.LS_vec, prob.K_vec, spec.cgs)
        err = np.abs(rep.solution - prob.S_vec).max()
        tau = 0.0
    elif scheme == "cn":
        rep = crank_nicolson_run(op, prob.source, prob.boundary, prob.exact(0.0),
                                 TimeStepConfig("cn", tau, T), spec.cgs)
        err = np.abs(rep.solution - prob.exact(T)).max()
    else:
        rep = bdf4_run(op, prob.source, prob.boundary, lambda k: prob.exact(k * tau),
                       TimeStepConfig("bdf4", tau, T, spec.startup), spec.cgs)
        err = np.abs(rep.solution - prob.exact(T)).max()
    its = rep.iterations_per_step
    return dict(tau=tau, error_inf=float(err), cgs_iters_max=rep.max_iterations,
                cgs_iters_mean=rep.mean_iterations, cgs_iters_final=int(its[-1]) if its.size else 0,
                wall_seconds=time.perf_counter() - t0)


def run_study(spec: StudySpec) -> list[ConvergenceRecord]:
    """One record per ``(gamma, M)``, gamma-major, in the order given.

    Solver failures are recorded on their row (``ok=False``, error NaN) and
    the study carries on.
    """
    records = []
    for g in spec.gammas:
        rows = []
        for M in spec.Ms:
            try:
                r = _solve_row(spec, g, M)
                rows.append(ConvergenceRecord(spec.problem, g, M, rate=None, **r))
            except (SolverFailure, CgsBreakdown) as exc:
                logger.error("%s gamma=%s M=%s failed: %s", spec.problem, g, M, exc)
                rows.append(ConvergenceRecord(spec.problem, g, M, float("nan"), float("nan"), None, 0, 0.0,
                                              ok=False, message=str(exc)))
        for rec, rate in zip(rows, observed_rates([r.error_inf for r in rows])):
            rec.rate = rate
        records.extend(rows)
    return records


def records_to_csv(records, handle=None) -> str:
    buf = io.StringIO() if handle is None else handle
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in records:
        w.writerow(r.csv_row())
    return buf.getvalue() if handle is None else ""


# -- timing ----------------------------------------------------------------------------


@dataclass
class TimingResult:
    Ms: np.ndarray
    seconds: np.ndarray
    c: float
    r2: float
    storage: np.ndarray

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["M", "seconds", "storage_floats"])
        for M, s, st in zip(self.Ms, self.seconds, self.storage):
            w.writerow([int(M), repr(float(s)), int(st)])
        return buf.getvalue()


def fit_mlogm(Ms, seconds):
    """Least-squares ``t = c M log M`` through the origin; returns ``(c, R^2)``."""
    Ms = np.asarray(Ms, dtype=float)
    t = np.asarray(seconds, dtype=float)
    if Ms.size == 0:
        return float("nan"), float("nan")
    f = Ms * np.log(Ms)
    c = float(f @ t / (f @ f))
    ss_res = float(((t - c * f) ** 2).sum())
    ss_tot = float(((t - t.mean()) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else float("nan")
    return c, r2


def _median_time(fn, repeats, inner):
    out = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        for _ in range(inner):
            fn()
        out.append((time.perf_counter() - t0) / inner)
    return float(np.median(out))


def run_timing(problem: str = "matvec1d", Ms=(), gamma: float = 0.5, repeats: int = 5,
               seed: int = 0) -> TimingResult:
    """Median-of-``repeats`` wall time per ``M`` for a structured 1D kernel.

    ``problem`` is ``matvec1d`` (one operator product) or ``step1d`` (one
    Crank-Nicolson step with ``tau = h``, cold-started CGS).
    """
    rng = np.random.default_rng(seed)
    secs, store = [], []
    for M in Ms:
        op = assemble_operator(CollocationGrid(0.0, 1.0, M), gamma)
        u = rng.standard_normal(op.size)
        op.matvec(u)  # warm the spectrum cache
        if problem == "matvec1d":
            fn = lambda: op.matvec(u)  # noqa: E731
        elif problem == "step1d":
            tau = op.grid.h
            shifted = lambda v: v + 0.5 * tau * op.matvec(v)  # noqa: E731
            rhs = u - 0.5 * tau * op.matvec(u)
            fn = lambda: cgs_solve(shifted, rhs, None, CgsConfig())  # noqa: E731
        else:
            raise ValueError(f"unknown timing problem {problem!r}")
        # repeat small problems so each sample is well above timer resolution
        inner = max(1, int(2 ** 14 // M))
        secs.append(_median_time(fn, repeats, inner))
        store.append(op.storage_floats())
    c, r2 = fit_mlogm(Ms, secs)
    return TimingResult(np.asarray(Ms), np.asarray(secs), c, r2, np.asarray(store))


# -- diagnostics -----------------------------------------------------------------------


def run_diagnostics(problem: str = "1d", gamma: float = 0.5, M: int = 16, scan: bool = False) -> str:
    """Dense dominance / conditioning / symmetric-part report as CSV text."""
    kind = {"1d": "1d", "2d-mult": "mult", "2d-add": "add"}.get(problem)
    if kind is None:
        raise ValueError(f"unknown diagnostics problem {problem!r}; use 1d, 2d-mult or 2d-add")
    bounds = (0.0, 1.0) if kind == "1d" else (0.0, 1.0, 0.0, 1.0)
    op = _build(kind, bounds, M, gamma)
    rep = dominance_report(op)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    d = rep.as_dict()
    w.writerow(["problem", "gamma", "M"] + list(d))
    w.writerow([problem, repr(gamma), M] + [repr(v) for v in d.values()])
    if scan:
        w.writerow([])
        w.writerow(["gamma", "M", "h_min_eig", "h_max_eig", "indefinite"])
        for g, m, lo, hi in indefiniteness_scan():
            w.writerow([repr(g), m, repr(lo), repr(hi), int(lo < 0 < hi)])
    return buf.getvalue()
