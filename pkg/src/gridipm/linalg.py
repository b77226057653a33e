"""Symmetric indefinite linear algebra kernels.

Provides LDL^T factorization with Bunch-Kaufman pivoting for sparse
symmetric matrices (dense panels internally, which is adequate at the
problem sizes this package targets), inertia reporting, multi-RHS
solves, and a partial factorization of the bordered system

    M = [[A, B^T],
         [B, 0  ]]

that stops after eliminating the A block, leaving -B A^{-1} B^T in the
border corner.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp

# Threshold of the Bunch-Kaufman pivot test, minimizes element growth.
_BK_ALPHA = (1.0 + np.sqrt(17.0)) / 8.0

# Relative tolerance below which a pivot counts as zero.
DEFAULT_PIVOT_TOL = 1e-12


class FactorizationError(Exception):
    """Base class for factorization failures."""


class SingularPivotError(FactorizationError):
    """Raised when elimination hits a (numerically) zero pivot."""

    def __init__(self, pivot_index: int, message: str | None = None):
        self.pivot_index = pivot_index
        super().__init__(message or f"singular pivot at index {pivot_index}")


class SparseSym:
    """Symmetric sparse matrix stored by its lower triangle."""

    def __init__(self, tril: sp.spmatrix):
        tril = sp.csc_matrix(tril)
        if tril.shape[0] != tril.shape[1]:
            raise ValueError(f"expected square matrix, got shape {tril.shape}")
        coo = tril.tocoo()
        if np.any(coo.row < coo.col):
            raise ValueError("entries above the diagonal are not allowed here")
        self.tril = tril
        self.n = tril.shape[0]

    @classmethod
    def from_dense(cls, a: np.ndarray, sym_tol: float = 1e-10) -> "SparseSym":
        """Build from a dense symmetric array, checking symmetry."""
        a = np.asarray(a, dtype=float)
        scale = max(1.0, np.abs(a).max()) if a.size else 1.0
        if a.size and np.abs(a - a.T).max() > sym_tol * scale:
            raise ValueError("input matrix is not symmetric")
        return cls(sp.csc_matrix(np.tril(a)))

    @classmethod
    def from_sparse(cls, a: sp.spmatrix) -> "SparseSym":
        """Build from a full symmetric scipy sparse matrix (keeps tril)."""
        return cls(sp.tril(a, format="csc"))

    def to_dense(self) -> np.ndarray:
        full = self.tril.toarray()
        full = full + full.T
        full[np.diag_indices(self.n)] -= self.tril.diagonal()
        return full

    def to_sparse(self) -> sp.csc_matrix:
        """Full symmetric matrix in CSC form."""
        upper = sp.triu(self.tril.T, k=1)
        return (self.tril + upper).tocsc()

    @property
    def nnz(self) -> int:
        return self.tril.nnz

    def norm_inf(self) -> float:
        if self.n == 0:
            return 0.0
        return float(np.abs(self.to_dense()).sum(axis=1).max())


@dataclass
class SymIndefFactor:
    """LDL^T factorization P A P^T = L D L^T with 1x1/2x2 pivot blocks."""

    n: int
    lower: np.ndarray          # unit lower triangular factor, permuted order
    perm: np.ndarray           # row permutation applied to inputs/outputs
    d_main: np.ndarray         # diagonal of D
    d_sub: np.ndarray          # subdiagonal of D (nonzero marks a 2x2 block)
    inertia: tuple[int, int, int]   # (n_plus, n_minus, n_zero)
    a_norm_inf: float
    pivot_tol: float
    # index bookkeeping for the block-diagonal solve
    _idx1: np.ndarray = field(repr=False, default=None)
    _idx2: np.ndarray = field(repr=False, default=None)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return solve(self, rhs)


def _d_block_indices(d_sub: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Classify D's entries into 1x1 pivots and starts of 2x2 blocks."""
    n = d_sub.size + 1
    idx2 = np.flatnonzero(d_sub != 0.0)
    if idx2.size and np.any(np.diff(idx2) < 2):
        raise FactorizationError("overlapping 2x2 pivot blocks in D")
    in2 = np.zeros(n, dtype=bool)
    in2[idx2] = True
    in2[idx2 + 1] = True
    idx1 = np.flatnonzero(~in2)
    return idx1, idx2


def _inertia_of_d(d_main: np.ndarray, d_sub: np.ndarray,
                  idx1: np.ndarray, idx2: np.ndarray,
                  ztol: np.ndarray) -> tuple[int, int, int]:
    """Signature of the block diagonal D via analytic block eigenvalues.

    ztol holds one zero threshold per pivot position. For a 2x2 block
    the eigenvalue of smaller magnitude is tested against the smaller
    of the pair's thresholds (near-cancellation at the finer row scale
    must not hide behind a badly scaled partner row).
    """
    ev = [d_main[idx1]]
    tol = [ztol[idx1]]
    if idx2.size:
        a = d_main[idx2]
        c = d_main[idx2 + 1]
        b = d_sub[idx2]
        half_tr = 0.5 * (a + c)
        disc = np.sqrt((0.5 * (a - c)) ** 2 + b ** 2)
        e_hi = half_tr + disc
        e_lo = half_tr - disc
        swap = np.abs(e_hi) < np.abs(e_lo)
        e_big = np.where(swap, e_lo, e_hi)
        e_small = np.where(swap, e_hi, e_lo)
        t_pair = np.stack([ztol[idx2], ztol[idx2 + 1]])
        ev.extend([e_big, e_small])
        tol.extend([t_pair.max(axis=0), t_pair.min(axis=0)])
    ev = np.concatenate(ev)
    tol = np.concatenate(tol)
    n_plus = int(np.sum(ev > tol))
    n_minus = int(np.sum(ev < -tol))
    n_zero = ev.size - n_plus - n_minus
    return n_plus, n_minus, n_zero


def factor(a: SparseSym | np.ndarray, pivot_tol: float = DEFAULT_PIVOT_TOL) -> SymIndefFactor:
    """LDL^T factorization with Bunch-Kaufman pivoting and inertia.

    The factorization is deterministic: identical input bits give
    identical factor bits. Eigenvalues of D count as zero in the
    reported inertia when they fall within ``pivot_tol`` times the max
    magnitude of the originating row (floored at 1). The per-row
    threshold matters for interior-point systems near convergence:
    their eliminated-slack diagonals dwarf the rest of the matrix, and
    a single norm-relative threshold would misread healthy small
    pivots from moderately scaled rows as zeros. An exactly-zero pivot
    encountered by the elimination raises :class:`SingularPivotError`.
    """
    if isinstance(a, SparseSym):
        dense = a.to_dense()
    else:
        dense = np.array(a, dtype=float)
    n = dense.shape[0]
    if n == 0:
        return SymIndefFactor(0, np.zeros((0, 0)), np.zeros(0, dtype=np.intp),
                              np.zeros(0), np.zeros(0), (0, 0, 0), 0.0, pivot_tol,
                              _idx1=np.zeros(0, dtype=np.intp),
                              _idx2=np.zeros(0, dtype=np.intp))
    a_norm = float(np.abs(dense).sum(axis=1).max())

    try:
        lu, d, perm = scipy.linalg.ldl(dense, lower=True)
    except np.linalg.LinAlgError as exc:          # pragma: no cover - defensive
        raise FactorizationError(str(exc)) from exc

    d_main = d.diagonal().copy()
    d_sub = d.diagonal(-1).copy()
    idx1, idx2 = _d_block_indices(d_sub)

    row_norm = np.abs(dense).max(axis=1)
    ztol = pivot_tol * np.maximum(row_norm[np.asarray(perm)], 1.0)
    inertia = _inertia_of_d(d_main, d_sub, idx1, idx2, ztol)

    lower = np.ascontiguousarray(lu[perm])
    return SymIndefFactor(n, lower, np.asarray(perm), d_main, d_sub,
                          inertia, a_norm, pivot_tol, _idx1=idx1, _idx2=idx2)


def _solve_d(f: SymIndefFactor, w: np.ndarray) -> np.ndarray:
    """Apply D^{-1} to a vector or matrix of stacked columns."""
    out = np.empty_like(w)
    idx1, idx2 = f._idx1, f._idx2
    if idx1.size:
        if np.any(f.d_main[idx1] == 0.0):
            raise SingularPivotError(int(idx1[np.flatnonzero(f.d_main[idx1] == 0.0)[0]]))
        out[idx1] = w[idx1] / f.d_main[idx1, None] if w.ndim == 2 else w[idx1] / f.d_main[idx1]
    if idx2.size:
        a = f.d_main[idx2]
        c = f.d_main[idx2 + 1]
        b = f.d_sub[idx2]
        det = a * c - b * b
        if np.any(det == 0.0):
            raise SingularPivotError(int(idx2[np.flatnonzero(det == 0.0)[0]]))
        w1, w2 = w[idx2], w[idx2 + 1]
        if w.ndim == 2:
            a, b, c, det = a[:, None], b[:, None], c[:, None], det[:, None]
        out[idx2] = (c * w1 - b * w2) / det
        out[idx2 + 1] = (a * w2 - b * w1) / det
    return out


def solve(f: SymIndefFactor, rhs: np.ndarray) -> np.ndarray:
    """Solve A x = rhs for one RHS vector or a matrix of RHS columns."""
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape[0] != f.n:
        raise ValueError(f"rhs has leading dimension {rhs.shape[0]}, expected {f.n}")
    if f.n == 0:
        return rhs.copy()
    b = rhs[f.perm]
    w = scipy.linalg.solve_triangular(f.lower, b, lower=True, unit_diagonal=True)
    m = _solve_d(f, w)
    y = scipy.linalg.solve_triangular(f.lower.T, m, lower=False, unit_diagonal=True)
    out = np.empty_like(y)
    out[f.perm] = y
    return out


def _bk_pivot(w: np.ndarray, k: int, n: int, tol: float) -> tuple[int, int]:
    """Bunch-Kaufman pivot choice restricted to rows/cols k..n-1 of w.

    Returns (kind, r) where kind is 1 or 2 and r the partner row: for a
    1x1 pivot r is the row to swap into position k, for a 2x2 pivot r is
    swapped into position k+1.
    """
    akk = abs(w[k, k])
    if k == n - 1:
        if akk <= tol:
            raise SingularPivotError(k)
        return 1, k
    col = np.abs(w[k + 1:n, k])
    r_off = int(np.argmax(col))
    lam = col[r_off]
    r = k + 1 + r_off
    if max(akk, lam) <= tol:
        raise SingularPivotError(k)
    if akk >= _BK_ALPHA * lam:
        return 1, k
    # magnitudes in row/col r within the pivotable window, excluding (r, r)
    row_part = np.abs(w[r, k:r])
    col_part = np.abs(w[r + 1:n, r])
    sigma = max(row_part.max() if row_part.size else 0.0,
                col_part.max() if col_part.size else 0.0)
    if akk * sigma >= _BK_ALPHA * lam * lam:
        return 1, k
    if abs(w[r, r]) >= _BK_ALPHA * sigma:
        return 1, r
    return 2, r


def _sym_swap(w: np.ndarray, i: int, j: int) -> None:
    if i == j:
        return
    w[[i, j], :] = w[[j, i], :]
    w[:, [i, j]] = w[:, [j, i]]


def partial_factor_augmented(a: SparseSym | np.ndarray, b: np.ndarray,
                             pivot_tol: float = DEFAULT_PIVOT_TOL) -> np.ndarray:
    """Border block of the partially factorized augmented system.

    Eliminates the A block of ``[[A, B^T], [B, 0]]`` with Bunch-Kaufman
    pivoting confined to A's rows and columns, then returns the fully
    updated border corner, which equals ``-B A^{-1} B^T``. Border rows
    that are entirely zero contribute zero rows/columns and are skipped.

    Only an exactly-zero pivot column raises: the pivoting keeps small
    1x1 pivots away from large columns, so a tiny pivot whose column is
    comparably tiny (a barely-active slack row, say) eliminates safely,
    and declaring near-singularity is the caller's job via the inertia
    of the full factorization.
    """
    if isinstance(a, SparseSym):
        dense_a = a.to_dense()
    else:
        dense_a = np.array(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n = dense_a.shape[0]
    m = b.shape[0]
    if b.shape[1] != n:
        raise ValueError(f"border has {b.shape[1]} columns, expected {n}")

    out = np.zeros((m, m))
    if n == 0 or m == 0:
        return out
    nz_rows = np.flatnonzero(np.any(b != 0.0, axis=1))
    if nz_rows.size == 0:
        return out

    bc = b[nz_rows]
    mt = n + nz_rows.size
    w = np.empty((mt, mt))
    w[:n, :n] = dense_a
    w[n:, :n] = bc
    w[:n, n:] = bc.T
    w[n:, n:] = 0.0

    tol = 0.0

    k = 0
    while k < n:
        kind, r = _bk_pivot(w, k, n, tol)
        if kind == 1:
            _sym_swap(w, k, r)
            d = w[k, k]
            if d == 0.0:
                raise SingularPivotError(k)
            col = w[k + 1:, k].copy()
            w[k + 1:, k + 1:] -= np.outer(col, col) / d
            k += 1
        else:
            _sym_swap(w, k + 1, r)
            d11, d21, d22 = w[k, k], w[k + 1, k], w[k + 1, k + 1]
            det = d11 * d22 - d21 * d21
            if det == 0.0:
                raise SingularPivotError(k)
            cols = w[k + 2:, k:k + 2].copy()
            # inv([[d11, d21], [d21, d22]]) applied from the right
            linv = np.empty_like(cols)
            linv[:, 0] = (cols[:, 0] * d22 - cols[:, 1] * d21) / det
            linv[:, 1] = (cols[:, 1] * d11 - cols[:, 0] * d21) / det
            w[k + 2:, k + 2:] -= linv @ cols.T
            k += 2

    out[np.ix_(nz_rows, nz_rows)] = w[n:, n:]
    return out
