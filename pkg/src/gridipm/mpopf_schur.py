"""Structured Schur path for period-coupled (storage) problems.

Every period block couples to the global rows through only two distinct
sub-blocks: C_1 on the current period's coupling rows and C_0 replicated
on all later ones. The period's Schur contribution (the additive term
S_n = -B_n A_n^{-1} B_n^T) therefore contains just three distinct
N_S x N_S blocks, and the accumulated global Schur complement is fully
described by one diagonal block per period plus one sub-diagonal block
per column: below the diagonal, every block of a column is identical.

That replication admits a block LDL^T whose trailing update is computed
once per column and applied to each remaining column, O(N^2) block
operations instead of O(N^3), and a back-substitution with running
prefix/suffix accumulators, O(N) instead of O(N^2). Block-operation
counters are kept so the complexity claims are testable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import scipy.sparse as sp

from . import linalg
from .schur import SingularScError


@dataclass
class ReplicatedScBlock:
    """The three distinct blocks of one period's Schur contribution.

    s_ij = -C_i A_n^{-1} C_j^T; replicating s_10/s_00 down the later
    coupling rows reconstructs the full -B_n A_n^{-1} B_n^T.
    """

    s_11: np.ndarray
    s_10: np.ndarray
    s_00: np.ndarray
    n: int                      # period index, 0-based

    @property
    def n_s(self) -> int:
        return self.s_11.shape[0]

    def replicate(self, n_periods: int) -> np.ndarray:
        """Expand to the full contribution matrix (test/oracle use)."""
        m = self.n_s
        out = np.zeros((n_periods * m, n_periods * m))

        def put(i, j, blk):
            out[i * m:(i + 1) * m, j * m:(j + 1) * m] = blk

        k = self.n
        put(k, k, self.s_11)
        for i in range(k + 1, n_periods):
            put(i, k, self.s_10)
            put(k, i, self.s_10.T)
            put(i, i, self.s_00)
            for j in range(k + 1, i):
                put(i, j, self.s_00)
                put(j, i, self.s_00.T)
        return out


def replicated_contribution(a_n, c_0: np.ndarray, c_1: np.ndarray,
                            n: int) -> ReplicatedScBlock:
    """Compute the three distinct blocks from one augmented partial
    factorization against the stacked 2*N_S border columns; the work is
    independent of the period count."""
    c_0 = c_0.toarray() if sp.issparse(c_0) else np.asarray(c_0, dtype=float)
    c_1 = c_1.toarray() if sp.issparse(c_1) else np.asarray(c_1, dtype=float)
    if c_0.shape != c_1.shape:
        raise ValueError("C_0 and C_1 differ in shape")
    m = c_0.shape[0]
    border = np.vstack([c_1, c_0])
    corner = linalg.partial_factor_augmented(_as_sym(a_n), border)
    s_11 = 0.5 * (corner[:m, :m] + corner[:m, :m].T)
    s_10 = corner[m:, :m]
    s_00 = 0.5 * (corner[m:, m:] + corner[m:, m:].T)
    return ReplicatedScBlock(s_11, s_10, s_00, n)


def _as_sym(a) -> linalg.SparseSym:
    if isinstance(a, linalg.SparseSym):
        return a
    if sp.issparse(a):
        return linalg.SparseSym.from_sparse(a)
    return linalg.SparseSym.from_dense(np.asarray(a, dtype=float))


@dataclass
class CompressedSc:
    """Compressed global Schur complement: (2N-1) blocks of N_S^2 values."""

    s_d: np.ndarray             # (N, N_S, N_S) diagonal blocks
    s_o: np.ndarray             # (N-1, N_S, N_S) sub-diagonal column blocks

    @property
    def n(self) -> int:
        return self.s_d.shape[0]

    @property
    def n_s(self) -> int:
        return self.s_d.shape[1]

    @property
    def n_values(self) -> int:
        return self.s_d.size + self.s_o.size

    def expand(self) -> np.ndarray:
        n, m = self.n, self.n_s
        out = np.zeros((n * m, n * m))
        for k in range(n):
            out[k * m:(k + 1) * m, k * m:(k + 1) * m] = self.s_d[k]
        for j in range(n - 1):
            for i in range(j + 1, n):
                out[i * m:(i + 1) * m, j * m:(j + 1) * m] = self.s_o[j]
                out[j * m:(j + 1) * m, i * m:(i + 1) * m] = self.s_o[j].T
        return out


def accumulate_global(contributions: List[ReplicatedScBlock],
                      c_corner=None,
                      n_periods: Optional[int] = None) -> CompressedSc:
    """Fold the per-period contributions into compressed storage.

    Running prefix sums: period n's s_00 replicates into every diagonal
    and sub-diagonal block of later columns, so

        S_d[k] = C(k,k) + s_11[k] + sum_{n<k} s_00[n]
        S_o[j] = s_10[j] + sum_{n<j} s_00[n]

    with the contributions already carrying their negative sign.
    c_corner (the coupling block C) must be block-diagonal; anything
    off the diagonal blocks cannot be represented in compressed form.
    """
    blocks = sorted(contributions, key=lambda b: b.n)
    n = len(blocks) if n_periods is None else int(n_periods)
    if [b.n for b in blocks] != list(range(n)):
        raise ValueError("contributions must cover periods 0..N-1 exactly")
    m = blocks[0].n_s
    c_diag = _corner_diag_blocks(c_corner, n, m)
    s_d = np.zeros((n, m, m))
    s_o = np.zeros((max(n - 1, 0), m, m))
    acc = np.zeros((m, m))
    for k in range(n):
        s_d[k] = c_diag[k] + blocks[k].s_11 + acc
        if k < n - 1:
            s_o[k] = blocks[k].s_10 + acc
        acc = acc + blocks[k].s_00
    return CompressedSc(s_d, s_o)


def _corner_diag_blocks(c_corner, n: int, m: int) -> np.ndarray:
    if c_corner is None:
        return np.zeros((n, m, m))
    dense = c_corner.toarray() if sp.issparse(c_corner) else np.asarray(c_corner,
                                                                        dtype=float)
    if dense.shape != (n * m, n * m):
        raise ValueError(f"coupling block is {dense.shape}, expected {(n * m, n * m)}")
    out = np.zeros((n, m, m))
    check = dense.copy()
    for k in range(n):
        out[k] = dense[k * m:(k + 1) * m, k * m:(k + 1) * m]
        check[k * m:(k + 1) * m, k * m:(k + 1) * m] = 0.0
    if check.size and np.abs(check).max() != 0.0:
        raise ValueError("coupling block has entries outside its diagonal blocks")
    return out


@dataclass
class StructuredFactor:
    """Block LDL^T of the expanded compressed Schur complement."""

    d_factors: List[linalg.SymIndefFactor]
    l_blocks: List[np.ndarray]        # the single replicated L block per column
    n: int
    n_s: int
    op_count: int                     # block operations spent factorizing
    last_solve_ops: int = 0

    @property
    def inertia(self) -> tuple:
        total = np.zeros(3, dtype=int)
        for f in self.d_factors:
            total += np.array(f.inertia)
        return (int(total[0]), int(total[1]), int(total[2]))


def structured_factorize(sc: CompressedSc) -> StructuredFactor:
    """Right-looking block LDL^T exploiting sub-diagonal replication.

    Column j's trailing update W_j = L_j D_j L_j^T is formed once and
    subtracted from every remaining diagonal and column block: O(N^2)
    block operations. A pivot block with zero eigenvalues aborts; the
    caller regularizes and retries.
    """
    n, m = sc.n, sc.n_s
    s_d = sc.s_d.copy()
    s_o = sc.s_o.copy()
    ops = 0
    d_factors: List[linalg.SymIndefFactor] = []
    l_blocks: List[np.ndarray] = []
    for j in range(n):
        fac = linalg.factor(s_d[j])
        ops += 1
        if fac.inertia[2] > 0:
            raise SingularScError(f"singular pivot block {j} in the "
                                  f"structured Schur factorization")
        d_factors.append(fac)
        if j < n - 1:
            # L_j = G_j D_j^{-1}; with D symmetric this is solve(G^T)^T
            l_j = fac.solve(s_o[j].T).T
            ops += 1
            w = s_o[j] @ l_j.T          # L_j D_j L_j^T = G_j L_j^T
            w = 0.5 * (w + w.T)
            ops += 1
            l_blocks.append(l_j)
            for k in range(j + 1, n):
                s_d[k] = s_d[k] - w
                ops += 1
                if k < n - 1:
                    s_o[k] = s_o[k] - w
                    ops += 1
    return StructuredFactor(d_factors, l_blocks, n, m, ops)


def structured_solve(factor: StructuredFactor, rhs: np.ndarray) -> np.ndarray:
    """Back-substitution with prefix/suffix accumulators, O(N) block ops.

    Forward pass: the sub-diagonal L blocks of column j are identical,
    so sum_{j<k} L[k,j] y_j collapses to a running accumulator; the
    backward pass uses the mirrored suffix sum.
    """
    n, m = factor.n, factor.n_s
    b = np.asarray(rhs, dtype=float).reshape(n, m)
    ops = 0
    y = np.empty_like(b)
    acc = np.zeros(m)
    for k in range(n):
        y[k] = b[k] - acc
        ops += 1
        if k < n - 1:
            acc = acc + factor.l_blocks[k] @ y[k]
            ops += 1
    xhat = np.empty_like(b)
    for k in range(n):
        xhat[k] = factor.d_factors[k].solve(y[k])
        ops += 1
    x = np.empty_like(b)
    tail = np.zeros(m)
    for k in range(n - 1, -1, -1):
        if k < n - 1:
            x[k] = xhat[k] - factor.l_blocks[k].T @ tail
        else:
            x[k] = xhat[k]
        ops += 1
        tail = tail + x[k]
        ops += 1
    factor.last_solve_ops = ops
    return x.reshape(-1)
