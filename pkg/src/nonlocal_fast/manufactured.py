"""Manufactured solutions ``u = theta(t) S(x[, y])`` and their discrete data.

For ``u`` of this form the source is ``f = theta' S + theta L[S]`` where
``L[S](x) = int (S(x) - S(z)) k(x - z) dz`` is the nonlocal term.  ``L``
kills constants, and the boundary data is linear in the traces, so both
``F`` and ``K`` reduce to one spatial vector each, scaled in time.

``L[S]`` is exact for polynomial factors (1D and multiplicative kernel)
through the moments

    mu_k(x) = int_a^b (z - x)^k |z - x|^-g dz
            = ((b - x)^(k+1-g) + (-1)^k (x - a)^(k+1-g)) / (k + 1 - g)

and uses Duffy-type quadrature around the point for the additive kernel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.polynomial import Polynomial
from scipy.special import roots_jacobi

from .kernels2d import AdditiveOperator, Grid2D, MultiplicativeOperator
from .pqc import CollocationGrid, StructuredOperator1D

__all__ = [
    "ManufacturedSolution",
    "DiscreteProblem",
    "SOLUTIONS",
    "get_solution",
    "moment",
    "nonlocal_term_1d",
    "nonlocal_term_multiplicative",
    "nonlocal_term_additive",
    "discretize",
]


@dataclass(frozen=True)
class ManufacturedSolution:
    """``u = theta(t) * (const + X(x) [* Y(y)])`` or a general ``spatial``.

    ``factors`` holds the polynomial factors when the closed-form source
    applies; ``spatial`` is always set and is what gets sampled.
    """

    id: str
    dim: int
    domain: tuple
    spatial: Callable
    factors: tuple | None = None
    const: float = 0.0
    theta: Callable = np.exp
    dtheta: Callable = np.exp
    source_policy: str = "closed-form"
    T: float = 1.0
    description: str = ""

    def u(self, *coords, t):
        return self.theta(t) * self.spatial(*coords)


def moment(k: int, x, a: float, b: float, gamma: float):
    """``int_a^b (z - x)^k |z - x|^-gamma dz`` for ``a <= x <= b``."""
    x = np.asarray(x, dtype=float)
    p = k + 1 - gamma
    return ((b - x) ** p + (-1) ** k * (x - a) ** p) / p


def _poly_L(P: Polynomial, x, a, b, gamma):
    """``int_a^b (P(x) - P(z)) |x - z|^-gamma dz`` by Taylor expansion at ``x``."""
    out = np.zeros_like(np.asarray(x, dtype=float))
    d = P
    for k in range(1, P.degree() + 1):
        d = d.deriv()
        out -= d(x) / math.factorial(k) * moment(k, x, a, b, gamma)
    return out


def _kernel_integral(x, a, b, gamma):
    return moment(0, x, a, b, gamma)


def nonlocal_term_1d(sol: ManufacturedSolution, grid: CollocationGrid, gamma: float) -> np.ndarray:
    """``L[S]`` at the collocation points (canonical order)."""
    (X,) = sol.factors
    return _poly_L(X, grid.points(), grid.a, grid.b, gamma)


def nonlocal_term_multiplicative(sol: ManufacturedSolution, grid: Grid2D, gamma: float) -> np.ndarray:
    """``L[XY]`` for the product kernel, from 1D pieces.

    ``L[XY] = X Ix L1Y + L1X Y Iy - L1X L1Y`` with ``I`` the kernel integral
    and ``L1`` the 1D nonlocal term in each direction.
    """
    X, Y = sol.factors
    gx, gy = grid.gx, grid.gy
    x, y = gx.points(), gy.points()
    LX, LY = _poly_L(X, x, gx.a, gx.b, gamma), _poly_L(Y, y, gy.a, gy.b, gamma)
    Ix, Iy = _kernel_integral(x, gx.a, gx.b, gamma), _kernel_integral(y, gy.a, gy.b, gamma)
    out = np.outer(X(x) * Ix, LY) + np.outer(LX, Y(y) * Iy) - np.outer(LX, LY)
    return out.ravel()


def nonlocal_term_additive(S: Callable, x, y, domain, gamma: float,
                           radial_order: int = 24, panel_order: int = 16,
                           chunk: int = 512) -> np.ndarray:
    """``int_Omega (S(P) - S(Q)) |P - Q|^-gamma dQ`` at points ``P = (x, y)``.

    The rectangle is split at ``P`` into four corner rectangles, each cut
    along its diagonal into two triangles with ``P`` at the apex.  Polar-like
    (Duffy) coordinates remove the singularity: the radial variable gets
    Gauss-Jacobi with weight ``s**(1 - gamma)``, the other one composite
    Gauss-Legendre on panels graded geometrically towards the near-singular
    end of thin triangles.
    """
    a, b, c, d = domain
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    xj, wj = roots_jacobi(radial_order, 0.0, 1.0 - gamma)
    s = (xj + 1) / 2
    ws = wj / 2 ** (2 - gamma)
    gl, glw = np.polynomial.legendre.leggauss(panel_order)
    gl, glw = (gl + 1) / 2, glw / 2

    # graded breakpoints: 0, r, 2r, 4r, ..., 1 with r the thinnest aspect ratio
    sides = np.concatenate([x - a, b - x, y - c, d - y])
    ratio = sides.min() / sides.max()
    levels = max(0, int(np.ceil(np.log2(1.0 / ratio)))) + 1

    out = np.empty(x.size)
    for lo in range(0, x.size, chunk):
        px, py = x[lo:lo + chunk, None, None], y[lo:lo + chunk, None, None]
        S0 = S(px, py)
        acc = np.zeros(px.shape[0])
        for qx in (a, b):
            for qy in (c, d):
                Lx, Ly = qx - px, qy - py  # (n, 1, 1)
                area = np.abs(Lx * Ly)
                for tri in range(2):
                    # thin direction ratio for this triangle
                    asp = np.abs(Lx / Ly) if tri == 0 else np.abs(Ly / Lx)
                    k = np.arange(levels)
                    brk = np.minimum(1.0, asp[..., 0] * 2.0 ** k)  # (n, levels)
                    brk = np.concatenate([np.zeros((brk.shape[0], 1)), brk], axis=1)
                    width = np.diff(brk, axis=1)
                    t = (brk[:, :-1, None] + width[:, :, None] * gl).reshape(brk.shape[0], 1, -1)
                    wt = (width[:, :, None] * glw).reshape(brk.shape[0], 1, -1)
                    if tri == 0:
                        dx, dy = Lx * s[:, None], Ly * s[:, None] * t
                        rho = np.hypot(Lx, Ly * t)
                    else:
                        dx, dy = Lx * s[:, None] * t, Ly * s[:, None]
                        rho = np.hypot(Lx * t, Ly)
                    diff = S0 - S(px + dx, py + dy)
                    integrand = diff * (wt * rho ** (-gamma)) * ws[:, None]
                    acc += area[:, 0, 0] * integrand.sum(axis=(1, 2))
        out[lo:lo + chunk] = acc
    return out


# -- built-in solutions -------------------------------------------------------------

_x = Polynomial([0.0, 1.0])


def _poly1d():
    X = _x**2 * (1 - _x) ** 2 + math.exp(-2)
    return ManufacturedSolution(
        "poly1d", 1, (0.0, 1.0), X, factors=(X,), T=1.0,
        description="e^t (x^2 (1-x)^2 + e^-2) on [0, 1]",
    )


def _mult2d():
    X = _x**2 * (2 - _x) ** 2
    c = -math.sin(1.0)
    return ManufacturedSolution(
        "mult2d", 2, (0.0, 2.0, 0.0, 2.0), lambda x, y: X(x) * X(y) + c, factors=(X, X), const=c, T=2.0,
        description="e^t (x^2 (2-x)^2 y^2 (2-y)^2 - sin 1) on [0, 2]^2",
    )


def _add_exp():
    def S(x, y):
        return np.exp(2 * x + 4 * y) * (np.sin(2 * x) + np.cos(4 * y)) + 1.0

    return ManufacturedSolution(
        "add2d-exp", 2, (0.0, 1.0, 0.0, 1.0), S, source_policy="quadrature", T=1.0,
        description="e^t (e^(2x+4y) (sin 2x + cos 4y) + 1) on [0, 1]^2",
    )


def _add_poly():
    X = _x**4 - _x**3 + _x**2 + 1
    Y = _x**4 - 2 * _x**3 + _x**2 + 1
    return ManufacturedSolution(
        "add2d-poly", 2, (0.0, 1.0, 0.0, 1.0), lambda x, y: X(x) * Y(y), factors=(X, Y),
        source_policy="quadrature", T=1.0,
        description="e^t (x^4 - x^3 + x^2 + 1)(y^4 - 2y^3 + y^2 + 1) on [0, 1]^2",
    )


def _zero(dim):
    def S(*coords):
        return np.zeros(np.broadcast(*coords).shape)

    dom = (0.0, 1.0) if dim == 1 else (0.0, 1.0, 0.0, 1.0)
    P0 = Polynomial([0.0])
    return ManufacturedSolution(f"zero{dim}d", dim, dom, S if dim == 2 else P0,
                                factors=(P0,) if dim == 1 else (P0, P0), description="u = 0")


SOLUTIONS = {s.id: s for s in (_poly1d(), _mult2d(), _add_exp(), _add_poly(), _zero(1), _zero(2))}


def get_solution(name: str) -> ManufacturedSolution:
    try:
        return SOLUTIONS[name]
    except KeyError:
        raise KeyError(f"unknown solution {name!r}; known: {sorted(SOLUTIONS)}") from None


# -- discrete data ---------------------------------------------------------------------


@dataclass
class DiscreteProblem:
    """Grid samples and time-dependent data vectors for one operator."""

    solution: ManufacturedSolution
    S_vec: np.ndarray  # S at the unknowns
    LS_vec: np.ndarray  # L[S] at the unknowns
    K_vec: np.ndarray  # boundary data for the trace of S
    extra: dict = field(default_factory=dict)

    def exact(self, t: float) -> np.ndarray:
        return self.solution.theta(t) * self.S_vec

    def source(self, t: float) -> np.ndarray:
        return self.solution.dtheta(t) * self.S_vec + self.solution.theta(t) * self.LS_vec

    def boundary(self, t: float) -> np.ndarray:
        return self.solution.theta(t) * self.K_vec

    def steady_rhs(self) -> np.ndarray:
        """``F + K`` for the steady problem ``L[S] = f`` with exact solution ``S``."""
        return self.LS_vec + self.K_vec


def discretize(sol: ManufacturedSolution, op, gamma: float | None = None,
               radial_order: int = 24, panel_order: int = 16) -> DiscreteProblem:
    """Sample ``sol`` on the unknowns of ``op`` and build its source and boundary data."""
    if isinstance(op, StructuredOperator1D):
        g = op.kernel.gamma if gamma is None else gamma
        grid = op.grid
        S_vec = np.asarray(sol.spatial(grid.points()), dtype=float)
        LS = nonlocal_term_1d(sol, grid, g)
        K = op.boundary_vector(sol.spatial(grid.a), sol.spatial(grid.b))
        return DiscreteProblem(sol, S_vec, LS, K)
    g = op.kernel.gamma if gamma is None else gamma
    grid = op.grid
    X, Y = grid.points()
    S_vec = np.asarray(sol.spatial(X, Y), dtype=float) * np.ones_like(X)
    K = op.boundary_vector(sol.spatial)
    if isinstance(op, MultiplicativeOperator):
        if sol.factors is None:
            raise ValueError("multiplicative sources need polynomial factors")
        LS = nonlocal_term_multiplicative(sol, grid, g)
    elif isinstance(op, AdditiveOperator):
        dom = (grid.gx.a, grid.gx.b, grid.gy.a, grid.gy.b)
        LS = nonlocal_term_additive(sol.spatial, X, Y, dom, g, radial_order, panel_order)
    else:
        raise TypeError(f"unsupported operator {type(op).__name__}")
    return DiscreteProblem(sol, S_vec, LS, K)
