"""Piecewise quadratic collocation (PQC) for the 1D weakly singular operator.

The discrete operator acting on the interior collocation values is stored
as ``A = D - G`` where ``D`` is diagonal and ``G`` is made of four Toeplitz
blocks::

    G = [[M, Q],
         [P, N]]

Unknowns are ordered with the integer nodes ``x_1 .. x_{M-1}`` first and the
cell midpoints ``x_{1/2} .. x_{M-1/2}`` second.  Every coefficient is the
exact integral of a quadratic Lagrange basis function against
``|x - y|**(-gamma)``; all of them scale like ``h**(1 - gamma)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.linalg import toeplitz

__all__ = [
    "WeaklySingularKernel",
    "CollocationGrid",
    "CoefficientTable",
    "StructuredOperator1D",
    "compute_coefficients",
    "assemble_operator",
    "boundary_vector",
    "collocation_integrals",
]

# Closed forms lose ~k**3 * eps relative accuracy through cancellation; past
# this argument the basis integrals are evaluated by Gauss-Legendre instead.
CLOSED_FORM_LIMIT = 16.0
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(30)


@dataclass(frozen=True)
class WeaklySingularKernel:
    """The kernel ``|x - y|**(-gamma)`` with ``0 < gamma < 1``."""

    gamma: float

    def __post_init__(self):
        g = float(self.gamma)
        if not (0.0 < g < 1.0) or not np.isfinite(g):
            raise ValueError(f"kernel exponent must satisfy 0 < gamma < 1, got {self.gamma!r}")
        object.__setattr__(self, "gamma", g)

    def __call__(self, r):
        return np.abs(r) ** (-self.gamma)


@dataclass(frozen=True)
class CollocationGrid:
    """Uniform mesh on ``[a, b]`` with ``M`` elements and half-point lattice."""

    a: float
    b: float
    M: int

    def __post_init__(self):
        if not self.a < self.b:
            raise ValueError(f"need a < b, got a={self.a}, b={self.b}")
        if int(self.M) != self.M or self.M < 2:
            raise ValueError(f"need an integer element count M >= 2, got {self.M!r}")
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "b", float(self.b))
        object.__setattr__(self, "M", int(self.M))

    @property
    def h(self) -> float:
        return (self.b - self.a) / self.M

    @property
    def size(self) -> int:
        """Number of interior unknowns, ``2M - 1``."""
        return 2 * self.M - 1

    def lattice(self) -> np.ndarray:
        """All half-points ``x_{i/2}``, ``i = 0..2M`` (boundary included)."""
        return self.a + np.arange(2 * self.M + 1) * (self.h / 2)

    def points(self) -> np.ndarray:
        """Interior collocation points in canonical (integer, then half) order."""
        return self.lattice()[self.half_indices()]

    def half_indices(self) -> np.ndarray:
        """Lattice index ``i`` (of ``x_{i/2}``) for each canonical unknown."""
        M = self.M
        return np.concatenate([2 * np.arange(1, M), 2 * np.arange(M) + 1])

    def canonical_from_lattice(self, values: np.ndarray) -> np.ndarray:
        """Pick interior values from a lattice array, reordered canonically.

        Works along the last axis.
        """
        return np.asarray(values)[..., self.half_indices()]


# -- reference basis integrals -------------------------------------------------
#
# With h = 1 and the collocation point at the origin, every coefficient is an
# integral over one or two unit cells of a quadratic basis piece against
# |s|**(-gamma).  ``dist`` is the distance (in units of h) from the point to
# the node (for node basis functions) or to the cell centre (midpoint basis).


def _gl_integral(poly, lo, hi, gamma, centre):
    """Integral of ``poly(s) * |centre - s|**(-gamma)`` over ``[lo, hi]``.

    Only valid when ``centre`` lies outside ``[lo, hi]``.
    """
    half = 0.5 * (hi - lo)
    s = 0.5 * (hi + lo) + half * _GL_NODES
    vals = poly(s)[None, :] * np.abs(np.asarray(centre)[:, None] - s[None, :]) ** (-gamma)
    return half * vals @ _GL_WEIGHTS


def _node_right(s):
    return (1.0 - s) * (1.0 - 2.0 * s)


def _node_left(s):
    return (1.0 + s) * (1.0 + 2.0 * s)


def _midpoint(s):
    return 4.0 * (0.5 + s) * (0.5 - s)


def _m_closed(k, gamma, eta):
    e3, e2 = 3.0 - gamma, 2.0 - gamma
    return 4 * eta * ((k + 1) ** e3 - (k - 1) ** e3) - eta * e3 * (
        (k + 1) ** e2 + 6 * k**e2 + (k - 1) ** e2
    )


def _q_closed(k, gamma, eta):
    e3, e2 = 3.0 - gamma, 2.0 - gamma
    return -8 * eta * ((k + 1) ** e3 - k**e3) + 4 * eta * e3 * ((k + 1) ** e2 + k**e2)


def _beta_closed(i, gamma, eta):
    e3, e2, e1 = 3.0 - gamma, 2.0 - gamma, 1.0 - gamma
    return 4 * eta * (i**e3 - (i - 1) ** e3) - eta * e3 * (
        3 * i**e2 + (i - 1) ** e2 - (2.0 - gamma) * i**e1
    )


def _node_coeff(dist, gamma, eta, scale):
    """Full node basis (support ``[-1, 1]``) seen from distance ``dist >= 1``."""
    dist = np.asarray(dist, dtype=float)
    out = _m_closed(dist, gamma, eta)
    far = dist > CLOSED_FORM_LIMIT
    if far.any():
        d = dist[far]
        out[far] = scale * (
            _gl_integral(_node_left, -1.0, 0.0, gamma, d)
            + _gl_integral(_node_right, 0.0, 1.0, gamma, d)
        )
    return out


def _mid_coeff(k, gamma, eta, scale):
    """Midpoint basis seen from distance ``k + 1/2`` (``k >= 0``)."""
    k = np.asarray(k, dtype=float)
    out = _q_closed(k, gamma, eta)
    far = k > CLOSED_FORM_LIMIT
    if far.any():
        out[far] = scale * _gl_integral(_midpoint, -0.5, 0.5, gamma, k[far] + 0.5)
    return out


def _edge_coeff(i, gamma, eta, scale):
    """Boundary half-basis (support ``[0, 1]``) seen from distance ``i >= 1``."""
    i = np.asarray(i, dtype=float)
    out = _beta_closed(i, gamma, eta)
    far = i > CLOSED_FORM_LIMIT
    if far.any():
        out[far] = scale * _gl_integral(_node_right, 0.0, 1.0, gamma, i[far])
    return out


@dataclass(frozen=True)
class CoefficientTable:
    """Toeplitz symbols, boundary weights and diagonal of the 1D operator.

    ``d_int`` holds the exact integral ``int_a^b |x_{i/2} - y|^{-gamma} dy``
    in canonical order; the diagonal of ``A`` is ``d_int`` minus ``m_0`` /
    ``n_0``.
    """

    eta_h_gamma: float
    m: np.ndarray
    n: np.ndarray
    p: np.ndarray
    q: np.ndarray
    beta: np.ndarray
    gamma_bnd: np.ndarray
    d_int: np.ndarray

    def __post_init__(self):
        for name in ("m", "n", "p", "q", "beta", "gamma_bnd", "d_int"):
            arr = getattr(self, name)
            arr.setflags(write=False)


def compute_coefficients(grid: CollocationGrid, kernel: WeaklySingularKernel) -> CoefficientTable:
    """Evaluate every PQC coefficient for ``grid`` and ``kernel``."""
    if not isinstance(kernel, WeaklySingularKernel):
        kernel = WeaklySingularKernel(kernel)
    M, h, g = grid.M, grid.h, kernel.gamma
    if M < 2:
        raise ValueError("need M >= 2")
    scale = h ** (1.0 - g)
    eta = scale / ((3.0 - g) * (2.0 - g) * (1.0 - g))

    k = np.arange(M, dtype=float)

    m = np.empty(M - 1)
    m[0] = 2.0 * (1.0 + g) * eta
    m[1:] = _node_coeff(k[1 : M - 1], g, eta, scale)

    p = np.empty(M - 1)
    # point x_{1/2} lies inside the node's support, so |k - 1| flips sign
    p[0] = 4 * eta * (1.5 ** (3 - g) + 0.5 ** (3 - g)) - eta * (3 - g) * (
        1.5 ** (2 - g) + 7 * 0.5 ** (2 - g)
    )
    p[1:] = _node_coeff(k[1 : M - 1] + 0.5, g, eta, scale)

    q = _mid_coeff(k[: M - 1], g, eta, scale)

    n = np.empty(M)
    n[0] = eta * (2.0 - g) * 2.0 ** (g + 1.0)
    # n_k = q_{k-1/2}: midpoint basis seen from distance k
    n[1:] = _mid_coeff(k[1:] - 0.5, g, eta, scale)

    beta = _edge_coeff(k[1:M], g, eta, scale)  # beta_1 .. beta_{M-1}
    gamma_bnd = np.empty(M)
    gamma_bnd[0] = eta * (2.0 - g) * (1.0 - g) * 2.0 ** (g - 1.0)
    gamma_bnd[1:] = _edge_coeff(k[1:] + 0.5, g, eta, scale)

    x = grid.points()
    d_int = ((x - grid.a) ** (1.0 - g) + (grid.b - x) ** (1.0 - g)) / (1.0 - g)

    return CoefficientTable(eta, m, n, p, q, beta, gamma_bnd, d_int)


def collocation_integrals(grid: CollocationGrid, kernel: WeaklySingularKernel) -> np.ndarray:
    """Dense ``(2M-1) x (2M+1)`` table of ``int phi_{l/2}(y) |x_{i/2} - y|^{-gamma} dy``.

    Rows are interior collocation points and columns all lattice basis
    functions, both in *lattice* order (``i = 1..2M-1``, ``l = 0..2M``).
    Built from the same coefficients as the operator; used for boundary data
    and for dense cross-checks.
    """
    c = compute_coefficients(grid, kernel)
    M = grid.M
    nl = 2 * M + 1
    out = np.empty((2 * M - 1, nl))
    for i in range(1, 2 * M):
        for l in range(nl):
            out[i - 1, l] = _lattice_entry(c, M, i, l)
    return out


def _lattice_entry(c: CoefficientTable, M: int, i: int, l: int) -> float:
    """Coefficient of basis ``phi_{l/2}`` in the row of point ``x_{i/2}``."""
    if l == 0 or l == 2 * M:
        # boundary basis; distance in half-steps from the boundary node
        dist2 = i if l == 0 else 2 * M - i
        return c.beta[dist2 // 2 - 1] if dist2 % 2 == 0 else c.gamma_bnd[dist2 // 2]
    d2 = abs(i - l)
    if l % 2 == 0:
        if i % 2 == 0:
            return c.m[d2 // 2]
        return c.p[(d2 - 1) // 2]
    if i % 2 == 0:
        return c.q[(d2 - 1) // 2]
    return c.n[d2 // 2]


@dataclass(frozen=True, eq=False)
class StructuredOperator1D:
    """``A = D - G`` held as a diagonal plus four Toeplitz symbols (O(M) storage)."""

    grid: CollocationGrid
    kernel: WeaklySingularKernel
    coeffs: CoefficientTable
    _fft_cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def size(self) -> int:
        return self.grid.size

    @cached_property
    def diagonal(self) -> np.ndarray:
        """Diagonal of ``A`` in canonical order."""
        M, c = self.grid.M, self.coeffs
        diag = c.d_int.copy()
        diag[: M - 1] -= c.m[0]
        diag[M - 1 :] -= c.n[0]
        return diag

    # symbols as (first column, first row) pairs
    def symbol_M(self):
        return self.coeffs.m, self.coeffs.m

    def symbol_N(self):
        return self.coeffs.n, self.coeffs.n

    def symbol_P(self):
        """``P`` is ``M x (M-1)``: first column ``p0, p0, p1, ...``; first row ``p0..p_{M-2}``."""
        p = self.coeffs.p
        return np.concatenate([[p[0]], p]), p.copy()

    def symbol_Q(self):
        """``Q`` is ``(M-1) x M``: first column ``q0..q_{M-2}``; first row ``q0, q0, q1, ...``."""
        q = self.coeffs.q
        return q.copy(), np.concatenate([[q[0]], q])

    def blocks_dense(self):
        """Dense ``M, Q, P, N`` blocks (testing only)."""
        return tuple(toeplitz(*s) for s in (self.symbol_M(), self.symbol_Q(), self.symbol_P(), self.symbol_N()))

    def G_dense(self) -> np.ndarray:
        Mb, Qb, Pb, Nb = self.blocks_dense()
        return np.block([[Mb, Qb], [Pb, Nb]])

    def D_dense(self) -> np.ndarray:
        return np.diag(self.coeffs.d_int)

    def to_dense(self) -> np.ndarray:
        return self.D_dense() - self.G_dense()

    def storage_floats(self) -> int:
        """Number of reals stored for the operator's data (coefficients + diagonal)."""
        c = self.coeffs
        return sum(a.size for a in (c.m, c.n, c.p, c.q, c.beta, c.gamma_bnd, c.d_int))

    def matvec(self, u):
        from .toeplitz import apply_operator_1d

        return apply_operator_1d(self, u)

    def boundary_vector(self, u_left, u_right) -> np.ndarray:
        return _boundary_from_coeffs(self.coeffs, u_left, u_right)


def assemble_operator(grid: CollocationGrid, kernel) -> StructuredOperator1D:
    """Build the structured 1D operator ``A = D - G``."""
    if not isinstance(kernel, WeaklySingularKernel):
        kernel = WeaklySingularKernel(kernel)
    return StructuredOperator1D(grid, kernel, compute_coefficients(grid, kernel))


def _boundary_from_coeffs(c: CoefficientTable, u_left, u_right) -> np.ndarray:
    left = np.concatenate([c.beta, c.gamma_bnd])
    right = np.concatenate([c.beta[::-1], c.gamma_bnd[::-1]])
    u_left = np.asarray(u_left, dtype=float)
    u_right = np.asarray(u_right, dtype=float)
    return np.multiply.outer(u_left, left) + np.multiply.outer(u_right, right)


def boundary_vector(grid: CollocationGrid, kernel, u_left, u_right) -> np.ndarray:
    """Boundary data ``K`` for Dirichlet values ``u_left = u(a)``, ``u_right = u(b)``.

    Scalars give a vector of length ``2M - 1``; arrays of boundary values
    broadcast to a leading batch axis.
    """
    if not isinstance(kernel, WeaklySingularKernel):
        kernel = WeaklySingularKernel(kernel)
    return _boundary_from_coeffs(compute_coefficients(grid, kernel), u_left, u_right)
