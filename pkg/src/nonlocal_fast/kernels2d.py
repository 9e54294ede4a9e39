"""2D operators for the multiplicative and additive (radial) Cauchy kernels.

Unknowns on ``(a, b) x (c, d)`` are stored x-major: the x-slices come in
the 1D canonical order (integer nodes first, then midpoints) and each slice
holds its y-values in the same canonical order.

Multiplicative kernel ``|x - X|^-g |y - Y|^-g``:
    ``A = Dx (x) Dy - Gx (x) Gy``, built from two 1D operators.

Additive kernel ``((x - X)^2 + (y - Y)^2)^(-g/2)``:
    ``A = D - G`` with ``G = [[M, Q], [P, N]]`` where each family is block
    Toeplitz in x with 2x2 Toeplitz-block y-level blocks.  Every coefficient
    is a sum of per-cell integrals ``T[ex, ey, a, b]`` of a product of local
    quadratic pieces, and the table depends only on the offset of the point
    from the cell.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import roots_jacobi

from .pqc import CollocationGrid, WeaklySingularKernel, assemble_operator
from .toeplitz import BlockToeplitzTable, KroneckerOperator, apply_G_1d, btcb_apply

__all__ = [
    "Grid2D",
    "QuadratureSpec",
    "QuadratureError",
    "MultiplicativeOperator",
    "AdditiveBlockTable",
    "AdditiveOperator",
    "build_multiplicative",
    "assemble_additive_coefficients",
    "build_additive",
    "apply_additive",
    "boundary_vector_2d",
    "cell_table",
    "local_basis",
]


class QuadratureError(RuntimeError):
    """Cell quadrature did not settle under order doubling."""


@dataclass(frozen=True)
class Grid2D:
    gx: CollocationGrid
    gy: CollocationGrid

    @classmethod
    def square(cls, a: float, b: float, M: int) -> "Grid2D":
        g = CollocationGrid(a, b, M)
        return cls(g, g)

    @property
    def shape(self):
        return self.gx.size, self.gy.size

    @property
    def size(self) -> int:
        return self.gx.size * self.gy.size

    def points(self):
        """Coordinates ``(X, Y)`` of the unknowns, flattened x-major."""
        X, Y = np.meshgrid(self.gx.points(), self.gy.points(), indexing="ij")
        return X.ravel(), Y.ravel()

    def boundary_lattice(self):
        """Lattice index pairs ``(L, R)`` and coordinates of all boundary half-points."""
        nx, ny = 2 * self.gx.M, 2 * self.gy.M
        L, R = np.meshgrid(np.arange(nx + 1), np.arange(ny + 1), indexing="ij")
        on = (L == 0) | (L == nx) | (R == 0) | (R == ny)
        L, R = L[on], R[on]
        return L, R, self.gx.lattice()[L], self.gy.lattice()[R]


def _as_kernel(kernel) -> WeaklySingularKernel:
    return kernel if isinstance(kernel, WeaklySingularKernel) else WeaklySingularKernel(kernel)


def _lattice_values(grid: Grid2D, g) -> np.ndarray:
    """Values of ``g`` on the full ``(2Mx+1) x (2My+1)`` lattice (boundary used only)."""
    if callable(g):
        X, Y = np.meshgrid(grid.gx.lattice(), grid.gy.lattice(), indexing="ij")
        return np.broadcast_to(np.asarray(g(X, Y), dtype=float), X.shape)
    return np.asarray(g, dtype=float)


# -- multiplicative kernel -------------------------------------------------------


class MultiplicativeOperator(KroneckerOperator):
    """Kronecker-form operator plus its boundary data."""

    def __init__(self, grid: Grid2D, kernel):
        self.grid = grid
        self.kernel = _as_kernel(kernel)
        super().__init__(assemble_operator(grid.gx, self.kernel), assemble_operator(grid.gy, self.kernel))

    def boundary_vector(self, g) -> np.ndarray:
        """Boundary data ``K`` for Dirichlet values ``g`` (callable ``g(x, y)`` or lattice array)."""
        V = _lattice_values(self.grid, g)
        ox, oy = self.opx, self.opy
        ix, iy = self.grid.gx.half_indices(), self.grid.gy.half_indices()
        # full 1D weight rows against a lattice vector: G v_int + edge terms
        def wy(v):
            return apply_G_1d(oy, v[..., iy]) + oy.boundary_vector(v[..., 0], v[..., -1])

        left = ox.boundary_vector(1.0, 0.0)
        right = ox.boundary_vector(0.0, 1.0)
        K = np.outer(left, wy(V[0])) + np.outer(right, wy(V[-1]))
        inner = V[ix]  # interior x rows, full y lattice
        bottom = apply_G_1d(ox, inner[:, 0])
        top = apply_G_1d(ox, inner[:, -1])
        K += np.outer(bottom, oy.boundary_vector(1.0, 0.0)) + np.outer(top, oy.boundary_vector(0.0, 1.0))
        return K.ravel()


def build_multiplicative(grid: Grid2D, kernel) -> MultiplicativeOperator:
    return MultiplicativeOperator(grid, kernel)


# -- additive kernel: cell integrals -------------------------------------------------


@dataclass(frozen=True)
class QuadratureSpec:
    """Per-cell quadrature orders for the additive coefficients.

    Cells whose closure holds the collocation point are split at the point
    into corner rectangles, each cut into two Duffy triangles integrated with
    Gauss-Jacobi (weight ``s**(1-gamma)``) radially and Gauss-Legendre in the
    angle-like variable.  Cells within ``near_cells`` cells of the point use
    tensor Gauss-Legendre of ``near_order``; the rest use ``far_order``.
    """

    far_order: int = 10
    near_order: int = 24
    near_cells: int = 2
    radial_order: int = 8
    angular_order: int = 24

    def __post_init__(self):
        if min(self.far_order, self.near_order, self.radial_order, self.angular_order) < 4:
            raise ValueError("quadrature order must be >= 4 per direction")

    def doubled(self) -> "QuadratureSpec":
        return QuadratureSpec(2 * self.far_order, 2 * self.near_order, self.near_cells,
                              2 * self.radial_order, 2 * self.angular_order)


def local_basis(s) -> np.ndarray:
    """Quadratic Lagrange pieces on ``[0, 1]`` with nodes 0, 1/2, 1; shape ``(3, *s.shape)``."""
    s = np.asarray(s, dtype=float)
    return np.stack([2 * (s - 0.5) * (s - 1), 4 * s * (1 - s), 2 * s * (s - 0.5)])


def _gl01(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return (x + 1) / 2, w / 2


def _tensor_cells(ex, ey, hx, hy, gamma, n):
    """``T[c, a, b]`` for non-singular cells with offsets ``(ex[c], ey[c])``."""
    s, w = _gl01(n)
    phi = local_basis(s) * w  # weights folded in
    out = np.empty((ex.size, 3, 3))
    chunk = max(1, 2_000_000 // (n * n))
    for lo in range(0, ex.size, chunk):
        sl = slice(lo, lo + chunk)
        dx = hx * (s[None, :] - 0.5 * ex[sl, None])
        dy = hy * (s[None, :] - 0.5 * ey[sl, None])
        K = (dx[:, :, None] ** 2 + dy[:, None, :] ** 2) ** (-gamma / 2)
        out[sl] = np.einsum("ckm,ak,bm->cab", K, phi, phi) * (hx * hy)
    return out


def _singular_cell(px, py, hx, hy, gamma, quad: QuadratureSpec):
    """``T[a, b]`` for one cell whose closure contains the point ``(px, py)`` (local coords)."""
    xj, wj = roots_jacobi(quad.radial_order, 0.0, 1.0 - gamma)
    s = (xj + 1) / 2
    ws = wj / 2 ** (2 - gamma)
    t, wt = _gl01(quad.angular_order)
    out = np.zeros((3, 3))
    for qx in (0.0, 1.0):
        for qy in (0.0, 1.0):
            Lx, Ly = qx - px, qy - py
            if Lx == 0 or Ly == 0:
                continue
            area = abs(Lx * Ly) * hx * hy
            for tri in range(2):
                if tri == 0:  # P + s (Lx, t Ly)
                    dx = np.outer(s, np.full_like(t, Lx))
                    dy = np.outer(s, t * Ly)
                    rho = np.hypot(hx * Lx, hy * Ly * t)
                else:  # P + s (t Lx, Ly)
                    dx = np.outer(s, t * Lx)
                    dy = np.outer(s, np.full_like(t, Ly))
                    rho = np.hypot(hx * Lx * t, hy * Ly)
                W = np.outer(ws, wt * rho ** (-gamma)) * area
                bx = local_basis(px + dx)
                by = local_basis(py + dy)
                out += np.einsum("km,akm,bkm->ab", W, bx, by)
    return out


def cell_table(hx: float, hy: float, Mx: int, My: int, gamma: float,
               quad: QuadratureSpec = QuadratureSpec()) -> np.ndarray:
    """Integrals ``T[ex - 1, ey - 1, a, b]`` for ``ex in 1..2Mx-1``, ``ey in 1..2My-1``.

    ``(ex, ey)`` is the collocation point's offset from the cell's lower-left
    corner in half-steps; offsets below 1 follow by reflection
    (``e -> 2 - e`` with ``a -> 2 - a``).
    """
    ex, ey = np.meshgrid(np.arange(1, 2 * Mx), np.arange(1, 2 * My), indexing="ij")
    ex, ey = ex.ravel(), ey.ravel()
    T = np.empty((ex.size, 3, 3))
    singular = (ex <= 2) & (ey <= 2)
    # distance from the point to the cell in whole cells (Chebyshev)
    gap = np.maximum(np.maximum(ex - 2, 0), np.maximum(ey - 2, 0)) / 2
    near = ~singular & (gap < quad.near_cells)
    far = ~singular & ~near
    for idx in np.flatnonzero(singular):
        T[idx] = _singular_cell(ex[idx] / 2, ey[idx] / 2, hx, hy, gamma, quad)
    if near.any():
        T[near] = _tensor_cells(ex[near], ey[near], hx, hy, gamma, quad.near_order)
    if far.any():
        T[far] = _tensor_cells(ex[far], ey[far], hx, hy, gamma, quad.far_order)
    return T.reshape(2 * Mx - 1, 2 * My - 1, 3, 3)


def _reflect_full(half: np.ndarray, Mx: int, My: int) -> np.ndarray:
    """Extend the ``e >= 1`` table to all offsets ``e in [3 - 2M, 2M - 1]``."""
    # along x: index of ex is ex + 2Mx - 3
    nx_lo = 2 * Mx - 2  # number of offsets below 1
    lo = half[1:nx_lo + 1][::-1, :, ::-1, :]  # e' = 2 - ex for e' = 2..2Mx-1
    fx = np.concatenate([lo, half], axis=0)
    ny_lo = 2 * My - 2
    lo = fx[:, 1:ny_lo + 1][:, ::-1, :, ::-1]
    return np.concatenate([lo, fx], axis=1)


# Pieces of a basis function by lattice parity: (cell shift c, local piece a)
# with point-to-cell offset e = (I - L) + c.
_NODE = ((2, 2), (0, 0))
_MID = ((1, 1),)


def _pieces(L: int, M: int):
    if L % 2:
        return _MID
    out = []
    if L > 0:
        out.append((2, 2))
    if L < 2 * M:
        out.append((0, 0))
    return tuple(out)


@dataclass(frozen=True, eq=False)
class AdditiveBlockTable:
    """Cell-integral table plus the four block-Toeplitz families and the diagonal."""

    grid: Grid2D
    gamma: float
    quad: QuadratureSpec
    T: np.ndarray  # full table, axes (ex + 2Mx - 3, ey + 2My - 3, a, b)
    families: dict  # "M", "Q", "P", "N" -> BlockToeplitzTable
    diagonal: np.ndarray  # D(i, j) as a flat x-major vector

    def coefficient(self, Dx, Dy, px, py):
        """Integral against the basis at lattice offset ``(I - L, J - R) = (Dx, Dy)``.

        ``px``/``py`` are piece lists (see ``_pieces``).  Broadcasts over
        ``Dx`` and ``Dy``.
        """
        ox, oy = 2 * self.grid.gx.M - 3, 2 * self.grid.gy.M - 3
        Dx, Dy = np.asarray(Dx), np.asarray(Dy)
        out = 0.0
        for cx, a in px:
            for cy, b in py:
                out = out + self.T[Dx + cx + ox, Dy + cy + oy, a, b]
        return out

    def storage_floats(self) -> int:
        return self.T.size + self.diagonal.size + sum(f.storage_floats() for f in self.families.values())


def _y_block(tab, Dx, py_row_odd, py_col_odd, px, My):
    """First column/row arrays for the y-level block of one parity pair."""
    col_p = _MID if py_col_odd else _NODE
    # rows j, columns r in block index units; lattice offsets
    if not py_row_odd and not py_col_odd:
        nr, nc, base = My - 1, My - 1, 0
    elif not py_row_odd and py_col_odd:
        nr, nc, base = My - 1, My, 1
    elif py_row_odd and not py_col_odd:
        nr, nc, base = My, My - 1, -1
    else:
        nr, nc, base = My, My, 0
    Dx = Dx[:, None]
    col = tab.coefficient(Dx, base + 2 * np.arange(nr)[None, :], px, col_p)
    row = tab.coefficient(Dx, base - 2 * np.arange(nc)[None, :], px, col_p)
    return np.broadcast_to(col, (Dx.shape[0], nr)).copy(), np.broadcast_to(row, (Dx.shape[0], nc)).copy()


def assemble_additive_coefficients(grid: Grid2D, kernel,
                                   quad: QuadratureSpec = QuadratureSpec()) -> AdditiveBlockTable:
    """Compute the distinct additive-kernel coefficients and lay out the four families."""
    gamma = _as_kernel(kernel).gamma
    Mx, My = grid.gx.M, grid.gy.M
    hx, hy = grid.gx.h, grid.gy.h
    half = cell_table(hx, hy, Mx, My, gamma, quad)
    T = _reflect_full(half, Mx, My)
    T.setflags(write=False)
    tab = AdditiveBlockTable(grid, gamma, quad, T, {}, np.empty(0))

    # x-level families: (row parity odd?, col parity odd?, rows_x, cols_x, lattice base)
    layout = {
        "M": (False, False, Mx - 1, Mx - 1, 0),
        "Q": (False, True, Mx - 1, Mx, 1),
        "P": (True, False, Mx, Mx - 1, -1),
        "N": (True, True, Mx, Mx, 0),
    }
    families = {}
    for name, (_, col_odd, rx, cx, base) in layout.items():
        o = np.arange(-(cx - 1), rx)
        Dx = base + 2 * o
        px = _MID if col_odd else _NODE
        blocks = [_y_block(tab, Dx, ro, co, px, My) for ro, co in
                  ((False, False), (False, True), (True, False), (True, True))]
        families[name] = BlockToeplitzTable(rx, cx, My, *blocks[0], *blocks[1], *blocks[2], *blocks[3])

    # D(I, J) = sum over cells of the cell integral of the kernel
    S = T.sum(axis=(2, 3))
    ox, oy = 2 * Mx - 3, 2 * My - 3
    I = grid.gx.half_indices()
    J = grid.gy.half_indices()
    R = np.zeros((S.shape[0], J.size))
    for cy in range(My):
        R += S[:, J - 2 * cy + oy]
    D = np.zeros((I.size, J.size))
    for cx in range(Mx):
        D += R[I - 2 * cx + ox]
    object.__setattr__(tab, "families", families)
    object.__setattr__(tab, "diagonal", D.ravel())
    return tab


def apply_additive(table: AdditiveBlockTable, U) -> np.ndarray:
    """``A U = D U - G U`` with each family product done by ``btcb_apply``."""
    U = np.asarray(U, dtype=float)
    Mx = table.grid.gx.M
    nx, ny = table.grid.shape
    if U.size != nx * ny:
        raise ValueError(f"expected {nx * ny} unknowns, got {U.size}")
    Umat = U.reshape(nx, ny)
    UL, UR = Umat[:Mx - 1].ravel(), Umat[Mx - 1:].ravel()
    f = table.families
    top = btcb_apply(f["M"], UL) + btcb_apply(f["Q"], UR)
    bot = btcb_apply(f["P"], UL) + btcb_apply(f["N"], UR)
    GU = np.concatenate([top, bot])
    return (table.diagonal * U.ravel() - GU).reshape(U.shape)


class AdditiveOperator:
    """Operator for the additive kernel, backed by an ``AdditiveBlockTable``."""

    def __init__(self, grid: Grid2D, kernel, quad: QuadratureSpec = QuadratureSpec()):
        self.grid = grid
        self.kernel = _as_kernel(kernel)
        self.table = assemble_additive_coefficients(grid, self.kernel, quad)

    @property
    def size(self) -> int:
        return self.grid.size

    @property
    def shape2d(self):
        return self.grid.shape

    @property
    def diagonal(self) -> np.ndarray:
        return self.table.diagonal

    def matvec(self, U) -> np.ndarray:
        return apply_additive(self.table, U)

    def storage_floats(self) -> int:
        return self.table.storage_floats()

    def G_dense(self) -> np.ndarray:
        """Dense ``G`` straight from the cell table (testing; no block structure used)."""
        gx, gy = self.grid.gx, self.grid.gy
        I, J = gx.half_indices(), gy.half_indices()
        out = np.empty((I.size, J.size, I.size, J.size))
        for li, L in enumerate(I):
            for ri, R in enumerate(J):
                out[:, :, li, ri] = self.table.coefficient(
                    (I - L)[:, None], (J - R)[None, :], _pieces(L, gx.M), _pieces(R, gy.M))
        n = I.size * J.size
        return out.reshape(n, n)

    def to_dense(self) -> np.ndarray:
        return np.diag(self.table.diagonal) - self.G_dense()

    def boundary_vector(self, g) -> np.ndarray:
        """Boundary data ``K`` for Dirichlet values ``g`` (callable or lattice array)."""
        V = _lattice_values(self.grid, g)
        gx, gy = self.grid.gx, self.grid.gy
        I, J = gx.half_indices()[:, None], gy.half_indices()[None, :]
        K = np.zeros((I.size, J.size))
        Lb, Rb, _, _ = self.grid.boundary_lattice()
        for L, R in zip(Lb, Rb):
            v = V[L, R]
            if v != 0.0:
                K += v * self.table.coefficient(I - L, J - R, _pieces(L, gx.M), _pieces(R, gy.M))
        return K.ravel()


def build_additive(grid: Grid2D, kernel, quad: QuadratureSpec = QuadratureSpec()) -> AdditiveOperator:
    return AdditiveOperator(grid, kernel, quad)


def boundary_vector_2d(op, g) -> np.ndarray:
    """Boundary data of a 2D operator (multiplicative or additive) for traces ``g``."""
    return op.boundary_vector(g)
