"""FFT-based products with Toeplitz, Kronecker and block-Toeplitz operators.

All products go through circulant embeddings.  Spectra are cached on first
use; the cached arrays are never written to afterwards, so applies are
re-entrant.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import fft as sfft

__all__ = [
    "ToeplitzSymbol",
    "CirculantSpectrum",
    "toeplitz_matvec",
    "embed_rectangular",
    "apply_G_1d",
    "apply_operator_1d",
    "KroneckerOperator",
    "kron_apply",
    "BlockToeplitzTable",
    "btcb_apply",
    "btcb_first_column",
]


def _next_pow2(n: int) -> int:
    return 1 << max(0, int(n - 1).bit_length())


@dataclass(frozen=True, eq=False)
class ToeplitzSymbol:
    """A (possibly rectangular) Toeplitz matrix given by first column and row."""

    first_col: np.ndarray
    first_row: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.first_col, dtype=float).ravel()
        r = np.asarray(self.first_row, dtype=float).ravel()
        if c.size == 0 or r.size == 0:
            raise ValueError("empty Toeplitz symbol")
        if c[0] != r[0]:
            raise ValueError(f"first column and first row disagree at (0, 0): {c[0]} != {r[0]}")
        object.__setattr__(self, "first_col", c)
        object.__setattr__(self, "first_row", r)

    @property
    def rows(self) -> int:
        return self.first_col.size

    @property
    def cols(self) -> int:
        return self.first_row.size

    @property
    def shape(self):
        return self.rows, self.cols

    def to_dense(self) -> np.ndarray:
        from scipy.linalg import toeplitz

        return toeplitz(self.first_col, self.first_row)

    @cached_property
    def spectrum(self) -> "CirculantSpectrum":
        return CirculantSpectrum.from_symbol(self)


@dataclass(frozen=True, eq=False)
class CirculantSpectrum:
    """Eigenvalues of a circulant matrix that embeds a Toeplitz symbol.

    The embedding length is ``2 * max(rows, cols)`` rounded up to a power of
    two.  Only the non-redundant half of the spectrum is kept (real input).
    """

    eigenvalues: np.ndarray
    embed_size: int
    rows: int
    cols: int

    @classmethod
    def from_symbol(cls, sym: ToeplitzSymbol) -> "CirculantSpectrum":
        n = _next_pow2(2 * max(sym.rows, sym.cols))
        c = np.zeros(n)
        c[: sym.rows] = sym.first_col
        # row entries t_{-k} wrap to the tail of the circulant's first column
        c[n - sym.cols + 1 :] = sym.first_row[:0:-1]
        eig = sfft.rfft(c)
        eig.setflags(write=False)
        return cls(eig, n, sym.rows, sym.cols)

    def first_column(self) -> np.ndarray:
        return sfft.irfft(self.eigenvalues, n=self.embed_size)

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Toeplitz product along the last axis of ``x``."""
        if x.shape[-1] != self.cols:
            raise ValueError(f"expected last dimension {self.cols}, got {x.shape[-1]}")
        xf = sfft.rfft(x, n=self.embed_size, axis=-1)
        y = sfft.irfft(xf * self.eigenvalues, n=self.embed_size, axis=-1)
        return y[..., : self.rows]


def toeplitz_matvec(symbol: ToeplitzSymbol, x) -> np.ndarray:
    """``T @ x`` for the Toeplitz matrix ``symbol``; batched over leading axes."""
    x = np.asarray(x, dtype=float)
    return symbol.spectrum.apply(x)


def embed_rectangular(symbol: ToeplitzSymbol) -> ToeplitzSymbol:
    """Embed an ``M x (M-1)`` or ``(M-1) x M`` Toeplitz block in an ``M x M`` one.

    ``M x (M-1)`` (the ``P`` shape) gains a trailing column whose first
    entry is zero; multiply it with ``x`` padded by a trailing zero.
    ``(M-1) x M`` (the ``Q`` shape) gains a last row whose first entry is
    zero; drop the last output entry.
    """
    r, c = symbol.rows, symbol.cols
    if r == c + 1:
        return ToeplitzSymbol(symbol.first_col, np.append(symbol.first_row, 0.0))
    if c == r + 1:
        return ToeplitzSymbol(np.append(symbol.first_col, 0.0), symbol.first_row)
    raise ValueError(f"expected an M x (M-1) or (M-1) x M symbol, got {r} x {c}")


# -- 1D operator ---------------------------------------------------------------


class _Spectra1D:
    """Cached spectra of the four square-embedded Toeplitz blocks of ``G``.

    ``M`` (size M-1) is embedded in an M x M Toeplitz matrix too, so all four
    products share one transform length and the input halves can be
    transformed once.
    """

    def __init__(self, op):
        M = op.grid.M
        c = op.coeffs
        self.M = M
        P_col, P_row = op.symbol_P()
        Q_col, Q_row = op.symbol_Q()
        # M block extended by one row/column; the extra entries only meet the
        # zero padding of w or land in the discarded output entry.
        m_ext = np.append(c.m, 0.0)
        syms = {
            "M": ToeplitzSymbol(m_ext, m_ext),
            "Q": embed_rectangular(ToeplitzSymbol(Q_col, Q_row)),
            "P": embed_rectangular(ToeplitzSymbol(P_col, P_row)),
            "N": ToeplitzSymbol(c.n, c.n),
        }
        self.n = _next_pow2(2 * M)
        self.eig = {}
        for k, s in syms.items():
            col = np.zeros(self.n)
            col[:M] = s.first_col
            col[self.n - M + 1 :] = s.first_row[:0:-1]
            e = sfft.rfft(col)
            e.setflags(write=False)
            self.eig[k] = e

    def apply_G(self, u: np.ndarray) -> np.ndarray:
        M, n = self.M, self.n
        w = u[..., : M - 1]
        v = u[..., M - 1 :]
        wf = sfft.rfft(w, n=n, axis=-1)  # zero padding == trailing-zero embedding
        vf = sfft.rfft(v, n=n, axis=-1)
        top = sfft.irfft(self.eig["M"] * wf + self.eig["Q"] * vf, n=n, axis=-1)[..., : M - 1]
        bot = sfft.irfft(self.eig["P"] * wf + self.eig["N"] * vf, n=n, axis=-1)[..., :M]
        return np.concatenate([top, bot], axis=-1)


def _spectra(op) -> _Spectra1D:
    cache = op._fft_cache
    if "spectra" not in cache:
        cache["spectra"] = _Spectra1D(op)
    return cache["spectra"]


def apply_G_1d(op, u) -> np.ndarray:
    """``G @ u`` along the last axis (batched)."""
    u = np.asarray(u, dtype=float)
    if u.shape[-1] != op.size:
        raise ValueError(f"expected last dimension {op.size}, got {u.shape[-1]}")
    return _spectra(op).apply_G(u)


def apply_operator_1d(op, u) -> np.ndarray:
    """``A @ u = D u - G u`` along the last axis (batched)."""
    u = np.asarray(u, dtype=float)
    if u.shape[-1] != op.size:
        raise ValueError(f"expected last dimension {op.size}, got {u.shape[-1]}")
    return op.coeffs.d_int * u - _spectra(op).apply_G(u)


# -- Kronecker (multiplicative kernel) -------------------------------------------


def kron_apply(opx, opy, U) -> np.ndarray:
    """``(Dx (x) Dy - Gx (x) Gy) U`` by two sweeps of 1D FFT products.

    ``U`` is the flat vector in x-major order (each x-slice holds the
    y-values in canonical order); a ``(nx, ny)`` array is accepted too and
    the result keeps the input's shape.
    """
    U = np.asarray(U, dtype=float)
    nx, ny = opx.size, opy.size
    if U.size != nx * ny:
        raise ValueError(f"expected {nx * ny} unknowns, got {U.size}")
    Umat = U.reshape(nx, ny)
    V = apply_G_1d(opy, Umat)  # G_y applied to every x-slice
    W = apply_G_1d(opx, V.T).T  # G_x applied to every y-slice
    out = np.outer(opx.coeffs.d_int, opy.coeffs.d_int) * Umat - W
    return out.reshape(U.shape)


class KroneckerOperator:
    """``A = Dx (x) Dy - Gx (x) Gy`` for the multiplicative kernel."""

    def __init__(self, opx, opy):
        self.opx = opx
        self.opy = opy

    @property
    def size(self) -> int:
        return self.opx.size * self.opy.size

    @property
    def shape2d(self):
        return self.opx.size, self.opy.size

    @cached_property
    def diagonal(self) -> np.ndarray:
        dx, dy = self.opx.coeffs.d_int, self.opy.coeffs.d_int
        gx = np.concatenate([np.full(self.opx.grid.M - 1, self.opx.coeffs.m[0]),
                             np.full(self.opx.grid.M, self.opx.coeffs.n[0])])
        gy = np.concatenate([np.full(self.opy.grid.M - 1, self.opy.coeffs.m[0]),
                             np.full(self.opy.grid.M, self.opy.coeffs.n[0])])
        return (np.outer(dx, dy) - np.outer(gx, gy)).ravel()

    def matvec(self, U) -> np.ndarray:
        return kron_apply(self.opx, self.opy, U)

    def to_dense(self) -> np.ndarray:
        Dx, Dy = self.opx.D_dense(), self.opy.D_dense()
        Gx, Gy = self.opx.G_dense(), self.opy.G_dense()
        return np.kron(Dx, Dy) - np.kron(Gx, Gy)

    def storage_floats(self) -> int:
        return self.opx.storage_floats() + self.opy.storage_floats()


# -- block Toeplitz with Toeplitz blocks (additive kernel) -----------------------
#
# One x-level block family (M, Q, P or N of the additive operator) is a block
# Toeplitz matrix whose blocks, in turn, are 2x2 arrangements of y-level
# Toeplitz matrices [[T_M, T_Q], [T_P, T_N]].  After square-embedding each
# y-level block to size My, the four are laid into one circulant of length
# 9*My (filler blocks S1..S5 in between), which turns every x-level block
# into a circulant and the family into a block-Toeplitz-circulant-block
# matrix.  Embedding the outer level once more gives a BCCB matrix that a 2D
# FFT diagonalises.


@dataclass(frozen=True, eq=False)
class BlockToeplitzTable:
    """Generators of one x-level block family.

    ``gen[name][o]`` for ``name`` in ``"MQPN"`` is the ``(first_col,
    first_row)`` pair of the y-level Toeplitz block at x-block offset
    ``o = i - l``, for ``o`` in ``[-(cols_x - 1), rows_x - 1]`` stored at
    index ``o + cols_x - 1``.  The y-level shapes are ``(My-1)x(My-1)``,
    ``(My-1)xMy``, ``My x(My-1)`` and ``My x My``.
    """

    rows_x: int
    cols_x: int
    My: int
    M_col: np.ndarray  # (n_off, My-1)
    M_row: np.ndarray
    Q_col: np.ndarray  # (n_off, My-1)
    Q_row: np.ndarray  # (n_off, My)
    P_col: np.ndarray  # (n_off, My)
    P_row: np.ndarray  # (n_off, My-1)
    N_col: np.ndarray  # (n_off, My)
    N_row: np.ndarray

    @property
    def n_offsets(self) -> int:
        return self.rows_x + self.cols_x - 1

    def block_dense(self, o: int) -> np.ndarray:
        """Dense ``(2My-1)^2`` y-level block at x-offset ``o`` (testing)."""
        from scipy.linalg import toeplitz

        k = o + self.cols_x - 1
        return np.block([
            [toeplitz(self.M_col[k], self.M_row[k]), toeplitz(self.Q_col[k], self.Q_row[k])],
            [toeplitz(self.P_col[k], self.P_row[k]), toeplitz(self.N_col[k], self.N_row[k])],
        ])

    def to_dense(self) -> np.ndarray:
        ny = 2 * self.My - 1
        out = np.zeros((self.rows_x * ny, self.cols_x * ny))
        for i in range(self.rows_x):
            for l in range(self.cols_x):
                out[i * ny:(i + 1) * ny, l * ny:(l + 1) * ny] = self.block_dense(i - l)
        return out

    def storage_floats(self) -> int:
        return sum(getattr(self, f).size for f in
                   ("M_col", "M_row", "Q_col", "Q_row", "P_col", "P_row", "N_col", "N_row"))

    @cached_property
    def spectrum(self) -> np.ndarray:
        c = btcb_first_column(self)
        spec = sfft.rfft2(c)
        spec.setflags(write=False)
        return spec


def _square_y_blocks(t: BlockToeplitzTable):
    """First columns/rows of the four y-level blocks embedded to ``My x My``.

    Returns arrays of shape ``(n_off, My)``.  Extra entries of the embedded
    ``T_M`` are set to zero; they only ever touch padding.
    """
    n_off, My = t.n_offsets, t.My
    z = np.zeros((n_off, 1))
    TM = (np.hstack([t.M_col, z]), np.hstack([t.M_row, z]))
    TQ = (np.hstack([t.Q_col, z]), t.Q_row)  # extra last row, zero first entry
    TP = (t.P_col, np.hstack([t.P_row, z]))  # extra last column, zero first entry
    TN = (t.N_col, t.N_row)
    return TM, TQ, TP, TN


def _circulant_9(TM, TQ, TP, TN, My: int, fill_S: bool = True) -> np.ndarray:
    """First columns (shape ``(n_off, 9*My)``) of the 9-block circulants.

    Block offset ``d`` (column block minus row block, mod 9) of the
    circulant holds: 0 -> S1, 1 -> T_M, 2 -> S2, 3 -> T_Q, 4 -> S3,
    5 -> T_P, 6 -> S4, 7 -> T_N, 8 -> S5.  Entry ``(j, r)`` of the block at
    offset ``d`` is ``c[(j - r - d*My) mod 9My]``.
    """
    n_off = TM[0].shape[0]
    L = 9 * My
    c = np.zeros((n_off, L))
    k = np.arange(1, My)
    for d, (col, row) in zip((1, 3, 5, 7), (TM, TQ, TP, TN)):
        base = -d * My
        c[:, base % L] = col[:, 0]
        c[:, (base + k) % L] = col[:, 1:]  # lower triangle, j - r = k
        c[:, (base - k) % L] = row[:, 1:]  # upper triangle, j - r = -k
    if fill_S:
        # S1's strictly lower part is the only index range no T block owns;
        # it is filled from T_M's first column as in the displayed S1.  Its
        # content is inert because the matching input blocks are zero.
        c[:, k] = TM[0][:, k]
    return c


def btcb_first_column(t: BlockToeplitzTable, fill_S: bool = True) -> np.ndarray:
    """First column of the BCCB embedding, as a ``(nbx, 9*My)`` array.

    Axis 0 runs over x-blocks of the block circulant (length a power of two
    >= ``rows_x + cols_x - 1``), axis 1 over the 9My-circulant.  Column
    ``c[b]`` is the circulant for block offset ``i - l = b`` (negative
    offsets wrap to the end).
    """
    My = t.My
    TM, TQ, TP, TN = _square_y_blocks(t)
    circ = _circulant_9(TM, TQ, TP, TN, My, fill_S)
    nbx = _next_pow2(t.rows_x + t.cols_x - 1)
    out = np.zeros((nbx, 9 * My))
    offsets = np.arange(-(t.cols_x - 1), t.rows_x)
    out[offsets % nbx] = circ
    return out


def expand_input(t: BlockToeplitzTable, U: np.ndarray) -> np.ndarray:
    """Lay each x-slice ``(w, v)`` into block slots 1 and 3 of a 9My vector."""
    My = t.My
    U = U.reshape(t.cols_x, 2 * My - 1)
    X = np.zeros((t.cols_x, 9 * My))
    X[:, My:2 * My - 1] = U[:, :My - 1]
    X[:, 3 * My:4 * My] = U[:, My - 1:]
    return X


def btcb_apply(t: BlockToeplitzTable, U_part, spectrum: np.ndarray | None = None) -> np.ndarray:
    """Product of one x-level block family with its slice of the unknowns.

    ``U_part`` holds ``cols_x`` x-slices of ``2My - 1`` values (y in
    canonical order).  Returns ``rows_x`` slices, flattened.
    """
    My = t.My
    U_part = np.asarray(U_part, dtype=float)
    if U_part.size != t.cols_x * (2 * My - 1):
        raise ValueError(f"expected {t.cols_x * (2 * My - 1)} values, got {U_part.size}")
    spec = t.spectrum if spectrum is None else spectrum
    nbx = spec.shape[0]
    X = np.zeros((nbx, 9 * My))
    X[:t.cols_x] = expand_input(t, U_part)
    Y = sfft.irfft2(sfft.rfft2(X) * spec, s=(nbx, 9 * My))
    Y = Y[:t.rows_x]
    # block row 0 of the 9-circulant gives T_M w + T_Q v, block row 5 gives T_P w + T_N v
    top = Y[:, :My - 1]
    bot = Y[:, 5 * My:6 * My]
    return np.concatenate([top, bot], axis=1).ravel()
