"""Dense diagnostics: diagonal dominance, conditioning, symmetric part, stability.

Everything here expands the operator densely and is meant for small sizes
(at most ``DENSE_CAP`` unknowns).
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy import linalg

from .pqc import CollocationGrid, StructuredOperator1D, assemble_operator

__all__ = [
    "DENSE_CAP",
    "SpectralReport",
    "DenseCapExceeded",
    "dense_matrix",
    "dominance_report",
    "symmetric_part_extremes",
    "indefiniteness_scan",
    "condition_growth",
    "diagonal_bound_1d",
    "diagonal_bound_multiplicative",
    "diagonal_bound_additive",
    "cond_limit_1d",
    "zero_data_evolution",
]

DENSE_CAP = 4096


class DenseCapExceeded(ValueError):
    pass


@dataclass
class SpectralReport:
    min_row_dominance_gap: float
    inf_norm: float
    inv_inf_norm_bound: float
    cond_bound: float
    h_min_eig: float
    h_max_eig: float
    size: int = 0
    cond_limit: float = float("nan")  # 4 (b-a) / ((1-g) h) for 1D operators
    min_gap_limit: float = float("nan")  # (b-a)^-g h for 1D operators

    def as_dict(self) -> dict:
        return asdict(self)


def dense_matrix(op_or_matrix, cap: int = DENSE_CAP) -> np.ndarray:
    """Dense copy of an operator (anything with ``to_dense``) or a 2D array."""
    if hasattr(op_or_matrix, "to_dense"):
        n = op_or_matrix.size
        if n > cap:
            raise DenseCapExceeded(f"{n} unknowns exceeds the dense cap {cap}")
        return op_or_matrix.to_dense()
    A = np.asarray(op_or_matrix, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("expected a square matrix")
    if A.shape[0] > cap:
        raise DenseCapExceeded(f"{A.shape[0]} unknowns exceeds the dense cap {cap}")
    return A


def row_dominance_gaps(A: np.ndarray) -> np.ndarray:
    """``|a_ii| - sum_{j != i} |a_ij|`` for each row."""
    d = np.abs(np.diag(A))
    return d - (np.abs(A).sum(axis=1) - d)


def symmetric_part_extremes(op_or_matrix, cap: int = DENSE_CAP):
    """Smallest and largest eigenvalue of ``H = (A + A^T) / 2``."""
    A = dense_matrix(op_or_matrix, cap)
    w = linalg.eigvalsh(0.5 * (A + A.T))
    return float(w[0]), float(w[-1])


def cond_limit_1d(grid: CollocationGrid, gamma: float) -> float:
    """Upper bound ``4 (b - a) / (1 - gamma) / h`` on the infinity-norm condition number."""
    return 4 * (grid.b - grid.a) / (1 - gamma) / grid.h


def diagonal_bound_1d(a, b, gamma) -> float:
    return 2 * (b - a) ** (1 - gamma) / (1 - gamma)


def diagonal_bound_multiplicative(a, b, c, d, gamma) -> float:
    return 4 * (b - a) ** (1 - gamma) * (d - c) ** (1 - gamma) / (1 - gamma) ** 2


def diagonal_bound_additive(a, b, c, d, gamma) -> float:
    return 2 * (b - a) * (d - c) ** (1 - gamma) / (1 - gamma)


def dominance_report(op_or_matrix, eigs: bool = True, cap: int = DENSE_CAP) -> SpectralReport:
    """Row-dominance gap, ``||A||_inf``, Varah bound ``1/gap`` on ``||A^-1||_inf`` and their product."""
    A = dense_matrix(op_or_matrix, cap)
    gap = float(row_dominance_gaps(A).min())
    norm = float(np.abs(A).sum(axis=1).max())
    inv_bound = 1.0 / gap if gap > 0 else float("inf")
    hmin, hmax = (float("nan"), float("nan"))
    if eigs:
        w = linalg.eigvalsh(0.5 * (A + A.T))
        hmin, hmax = float(w[0]), float(w[-1])
    rep = SpectralReport(gap, norm, inv_bound, norm * inv_bound, hmin, hmax, size=A.shape[0])
    if isinstance(op_or_matrix, StructuredOperator1D):
        g = op_or_matrix.grid
        gamma = op_or_matrix.kernel.gamma
        rep.cond_limit = cond_limit_1d(g, gamma)
        rep.min_gap_limit = (g.b - g.a) ** (-gamma) * g.h
    return rep


def indefiniteness_scan(gammas=(0.1, 0.3, 0.5, 0.7, 0.9), Ms=(8, 16, 32, 64), a=0.0, b=1.0):
    """Symmetric-part extremes over a parameter grid.

    Returns a list of ``(gamma, M, min_eig, max_eig)`` rows; the operator
    is indefinite in the sense of its symmetric part wherever
    ``min_eig < 0 < max_eig``.
    """
    rows = []
    for g in gammas:
        for M in Ms:
            lo, hi = symmetric_part_extremes(assemble_operator(CollocationGrid(a, b, M), g))
            rows.append((g, M, lo, hi))
    return rows


def condition_growth(Ms=(16, 32, 64, 128), gamma=0.5, a=0.0, b=1.0):
    """Dense ``kappa_inf`` over ``Ms`` and the fitted log-log slope against ``M``."""
    kappas = []
    for M in Ms:
        A = assemble_operator(CollocationGrid(a, b, M), gamma).to_dense()
        kappas.append(np.linalg.norm(A, np.inf) * np.linalg.norm(np.linalg.inv(A), np.inf))
    slope = np.polyfit(np.log(Ms), np.log(kappas), 1)[0]
    return np.array(kappas), float(slope)


def zero_data_evolution(op, u0, tau: float, T: float, cgs=None):
    """Crank-Nicolson with zero source and boundary; returns ``||U^k||_inf`` for ``k = 0..N``."""
    from .solvers import CgsConfig, TimeStepConfig, crank_nicolson_run

    u0 = np.asarray(u0, dtype=float)
    norms = [np.abs(u0).max()]
    crank_nicolson_run(op, None, None, u0, TimeStepConfig("cn", tau, T), cgs or CgsConfig(),
                       observer=lambda k, U: norms.append(np.abs(U).max()))
    return np.array(norms)
