"""Conjugate Gradient Squared and the Crank-Nicolson / BDF4 time steppers."""

from __future__ import annotations

import enum
import logging
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "CgsConfig",
    "CgsBreakdown",
    "SolverFailure",
    "Scheme",
    "Startup",
    "TimeStepConfig",
    "SolveReport",
    "cgs_solve",
    "steady_solve",
    "crank_nicolson_run",
    "bdf4_run",
    "time_grid",
]

logger = logging.getLogger(__name__)

BDF4_LEAD = 25.0 / 12.0
BDF4_HISTORY = (4.0, -3.0, 4.0 / 3.0, -0.25)


class CgsBreakdown(RuntimeError):
    """Raised when a CGS inner product vanishes relative to ``||r0||**2``."""


class SolverFailure(RuntimeError):
    """A time step's linear solve failed; ``step`` is the 1-based step index."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step


@dataclass(frozen=True)
class CgsConfig:
    tol: float = 1e-9
    maxit: int = 1000
    record_history: bool = False
    # true residual b - A x is recomputed every this many iterations
    refresh_every: int = 10

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.maxit < 1:
            raise ValueError("maxit must be >= 1")


class Scheme(str, enum.Enum):
    CRANK_NICOLSON = "cn"
    BDF4 = "bdf4"


class Startup(str, enum.Enum):
    EXACT_HISTORY = "exact"
    CN_RAMP_UP = "cn-ramp"


@dataclass(frozen=True)
class TimeStepConfig:
    scheme: Scheme
    tau: float
    T: float
    startup: Startup = Startup.EXACT_HISTORY

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        object.__setattr__(self, "startup", Startup(self.startup))
        if not (0 < self.tau <= self.T):
            raise ValueError(f"need 0 < tau <= T, got tau={self.tau}, T={self.T}")
        time_grid(self.tau, self.T)

    @property
    def steps(self) -> int:
        return time_grid(self.tau, self.T)


def time_grid(tau: float, T: float) -> int:
    """Number of steps ``N = T / tau``; rejects non-integer ratios."""
    N = int(round(T / tau))
    if N < 1 or abs(N * tau - T) > 1e-12 * T:
        raise ValueError(f"T / tau must be a positive integer (T={T}, tau={tau})")
    return N


@dataclass
class SolveReport:
    solution: np.ndarray
    iterations_per_step: np.ndarray
    residuals: np.ndarray
    wall_seconds: float
    converged: bool = True
    history: list = field(default_factory=list)

    @property
    def iterations(self) -> int:
        return int(self.iterations_per_step.sum())

    @property
    def max_iterations(self) -> int:
        return int(self.iterations_per_step.max()) if self.iterations_per_step.size else 0

    @property
    def mean_iterations(self) -> float:
        return float(self.iterations_per_step.mean()) if self.iterations_per_step.size else 0.0


def _as_apply(op) -> Callable[[np.ndarray], np.ndarray]:
    if callable(op) and not hasattr(op, "matvec"):
        return op
    return op.matvec


def cgs_solve(apply, rhs, x0=None, cfg: CgsConfig = CgsConfig()) -> SolveReport:
    """Solve ``A x = rhs`` with unpreconditioned CGS.

    ``apply`` is a callable or an object with ``matvec``.  The residual is
    carried in update form, replaced by ``b - A x`` every ``refresh_every``
    iterations, and convergence (``||r|| <= tol * ||rhs||``) is only
    accepted on a true residual.  The shadow residual is the initial
    residual.  On ``maxit`` the best iterate seen is returned with
    ``converged=False``.
    """
    t0 = time.perf_counter()
    A = _as_apply(apply)
    b = np.asarray(rhs, dtype=float)
    if not np.all(np.isfinite(b)):
        raise ValueError("right-hand side has non-finite entries")
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        x[:] = 0.0
        return SolveReport(x, np.array([0]), np.array([0.0]), time.perf_counter() - t0)

    threshold = cfg.tol * bnorm
    r = b - A(x) if x0 is not None else b.copy()
    rnorm = np.linalg.norm(r)
    history = [rnorm / bnorm] if cfg.record_history else []
    if rnorm <= threshold:
        return SolveReport(x, np.array([0]), np.array([rnorm / bnorm]), time.perf_counter() - t0,
                           history=history)

    r_star = r.copy()
    tiny = np.finfo(float).eps ** 2 * rnorm**2
    rho = r @ r_star
    z = r.copy()
    p = r.copy()
    best_x, best_res = x.copy(), rnorm
    j = 0
    while j < cfg.maxit:
        Ap = A(p)
        sigma = Ap @ r_star
        if abs(sigma) <= tiny or abs(rho) <= tiny:
            raise CgsBreakdown(f"CGS breakdown at iteration {j}: (Ap, r*)={sigma:.3e}, (r, r*)={rho:.3e}")
        alpha = rho / sigma
        q = z - alpha * Ap
        zq = z + q
        x += alpha * zq
        j += 1
        true_res = j % cfg.refresh_every == 0
        r = b - A(x) if true_res else r - alpha * A(zq)
        rnorm = np.linalg.norm(r)
        if rnorm <= threshold and not true_res:
            # confirm against the true residual before stopping
            r = b - A(x)
            rnorm = np.linalg.norm(r)
            true_res = True
        if cfg.record_history:
            history.append(rnorm / bnorm)
        if rnorm < best_res:
            best_x, best_res = x.copy(), rnorm
        if rnorm <= threshold:
            break
        if true_res and j % cfg.refresh_every != 0:
            # update-form residual drifted: restart the recurrences from the true one
            r_star = r.copy()
            rho = r @ r_star
            z = r.copy()
            p = r.copy()
            continue
        rho_new = r @ r_star
        beta = rho_new / rho
        rho = rho_new
        z = r + beta * q
        p = z + beta * (q + beta * p)

    converged = rnorm <= threshold
    if not converged:
        logger.warning("CGS hit maxit=%d with relative residual %.3e", cfg.maxit, best_res / bnorm)
        x = best_x
        rnorm = best_res
    return SolveReport(x, np.array([j]), np.array([rnorm / bnorm]), time.perf_counter() - t0,
                       converged=converged, history=history)


def steady_solve(op, F, K, cgs: CgsConfig = CgsConfig(), x0=None) -> SolveReport:
    """Solve ``A U = F + K`` (any operator with ``matvec``)."""
    rhs = np.asarray(F, dtype=float) + np.asarray(K, dtype=float)
    rep = cgs_solve(op, rhs, x0, cgs)
    if not rep.converged:
        raise SolverFailure("steady CGS solve did not converge")
    return rep


def _evaluate(fn, t, like):
    if fn is None:
        return np.zeros_like(like)
    return np.asarray(fn(t) if callable(fn) else fn, dtype=float)


def _shifted(A, lead, scale):
    return lambda v: lead * v + scale * A(v)


def _cn_steps(A, U, t_start, tau, nsteps, source, boundary, cgs, iters, resid, step_offset=0, observer=None):
    lhs = _shifted(A, 1.0, 0.5 * tau)
    for k in range(1, nsteps + 1):
        t_half = t_start + (k - 0.5) * tau
        rhs = U - 0.5 * tau * A(U) + tau * (_evaluate(source, t_half, U) + _evaluate(boundary, t_half, U))
        rep = cgs_solve(lhs, rhs, U, cgs)
        if not rep.converged:
            raise SolverFailure(f"CGS failed at step {k + step_offset}", k + step_offset)
        U = rep.solution
        iters.append(int(rep.iterations_per_step[0]))
        resid.append(float(rep.residuals[0]))
        if observer is not None:
            observer(k + step_offset, U)
    return U


def crank_nicolson_run(op, source, boundary, u0, cfg: TimeStepConfig, cgs: CgsConfig = CgsConfig(),
                       observer=None) -> SolveReport:
    """March ``U' + A U = F + K`` with Crank-Nicolson from ``u0`` to ``cfg.T``.

    ``source(t)`` and ``boundary(t)`` return vectors over the unknowns
    (``None`` means zero).  Each step is warm-started from the previous
    solution.  ``observer(k, U)`` is called after every step.
    """
    t0 = time.perf_counter()
    A = _as_apply(op)
    N = time_grid(cfg.tau, cfg.T)
    iters, resid = [], []
    U = np.array(u0, dtype=float)
    U = _cn_steps(A, U, 0.0, cfg.tau, N, source, boundary, cgs, iters, resid, observer=observer)
    return SolveReport(U, np.array(iters), np.array(resid), time.perf_counter() - t0)


def bdf4_run(op, source, boundary, u_history_provider, cfg: TimeStepConfig,
             cgs: CgsConfig = CgsConfig(), observer=None) -> SolveReport:
    """March with the 4-step BDF formula.

    ``u_history_provider(k)`` returns ``U^k``.  With
    ``Startup.EXACT_HISTORY`` it is called for ``k = 0..3``; with
    ``Startup.CN_RAMP_UP`` only ``U^0`` is requested and ``U^1..U^3`` come
    from Crank-Nicolson with ``tau / 16`` substeps.  ``observer(k, U)`` is
    called for ``k = 1..N`` (startup values included).
    """
    t0 = time.perf_counter()
    A = _as_apply(op)
    tau = cfg.tau
    N = time_grid(tau, cfg.T)
    if N < 4:
        raise ValueError("BDF4 needs at least 4 time steps")
    iters, resid = [], []
    hist = [np.array(u_history_provider(0), dtype=float)]
    if cfg.startup is Startup.EXACT_HISTORY:
        for k in range(1, 4):
            hk = u_history_provider(k)
            if hk is None:
                raise ValueError(f"missing BDF4 starting value U^{k}")
            hist.append(np.array(hk, dtype=float))
            if observer is not None:
                observer(k, hist[-1])
    else:
        sub = 16
        U = hist[0]
        for k in range(1, 4):
            U = _cn_steps(A, U, (k - 1) * tau, tau / sub, sub, source, boundary, cgs, [], [], k - 1)
            hist.append(U)
            if observer is not None:
                observer(k, U)

    lhs = _shifted(A, BDF4_LEAD, tau)
    c1, c2, c3, c4 = BDF4_HISTORY
    U = hist[-1]
    for k in range(4, N + 1):
        tk = k * tau
        rhs = c1 * hist[-1] + c2 * hist[-2] + c3 * hist[-3] + c4 * hist[-4]
        rhs += tau * (_evaluate(source, tk, U) + _evaluate(boundary, tk, U))
        rep = cgs_solve(lhs, rhs, hist[-1], cgs)
        if not rep.converged:
            raise SolverFailure(f"CGS failed at step {k}", k)
        U = rep.solution
        hist = hist[-3:] + [U]
        if observer is not None:
            observer(k, U)
        iters.append(int(rep.iterations_per_step[0]))
        resid.append(float(rep.residuals[0]))
    return SolveReport(U, np.array(iters), np.array(resid), time.perf_counter() - t0)
