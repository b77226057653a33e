"""Arrowhead-structured linear solver via the Schur complement.

The condensed KKT operator of a scenario- or period-coupled problem,
permuted so that each scenario's rows come first and the coupling rows
last, is bordered block-diagonal:

    [A_1          B_1^T] [du_1]   [b_1]
    [     ...       ... ] [ .. ] = [ .. ]
    [          A_N B_N^T] [du_N]   [b_N]
    [B_1  ...  B_N   C  ] [du_g]   [b_C]

Each block contributes S_i = B_i A_i^{-1} B_i^T and r_i = B_i A_i^{-1} b_i
independently; the dense Schur complement S = C - sum S_i is factorized
once, S du_g = b_C - r gives the coupling solution, and local back-solves
A_i du_i = b_i - B_i^T du_g finish. Contributions are accumulated in
ascending block order regardless of which worker produced them, so the
assembled S and the final direction are bitwise independent of the
worker count.
"""

from __future__ import annotations

import hashlib
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import scipy.sparse as sp

from . import linalg

COUPLING = -1

PHASES = ("init", "sc-assembly", "sc-rhs", "sc-solve", "local-solve")


class SchurError(Exception):
    pass


class StructureViolation(SchurError):
    pass


class SingularBlockError(SchurError):
    def __init__(self, block: int, message: str = ""):
        self.block = block
        super().__init__(message or f"diagonal block {block} is singular")


class SingularScError(SchurError):
    pass


@dataclass
class BlockMap:
    """Block labels for every variable and constraint of a problem.

    Labels are block ids 0..n_blocks-1 or COUPLING (-1). Slacks inherit
    the label of their inequality row unless slack_labels overrides it;
    the override matters when a row's multiplier couples the blocks but
    its slack belongs to exactly one of them (period-cumulative rows).
    keep_slacks marks rows whose slack must stay explicit in the
    condensed system (their border column carries structure the
    coupling block needs); slack_groups ties rows that must be
    eliminated all-or-nothing so that repeated blocks keep identical
    dimensions.
    """

    x_labels: np.ndarray
    eq_labels: np.ndarray
    ineq_labels: np.ndarray
    n_blocks: int
    keep_slacks: Optional[np.ndarray] = None
    slack_groups: Optional[np.ndarray] = None
    slack_labels: Optional[np.ndarray] = None

    def __post_init__(self):
        self.x_labels = np.asarray(self.x_labels, dtype=int)
        self.eq_labels = np.asarray(self.eq_labels, dtype=int)
        self.ineq_labels = np.asarray(self.ineq_labels, dtype=int)
        if self.slack_labels is not None:
            self.slack_labels = np.asarray(self.slack_labels, dtype=int)
            if self.slack_labels.shape != self.ineq_labels.shape:
                raise ValueError("slack_labels must match ineq_labels "
                                 "in length")

    def reduced_labels(self, reduced) -> np.ndarray:
        """Labels for the rows of a slack-condensed KKT operator."""
        slacks = (self.ineq_labels if self.slack_labels is None
                  else self.slack_labels)
        return np.concatenate([
            self.x_labels, self.eq_labels, self.ineq_labels,
            slacks[reduced.kept],
        ])

    def block_sizes(self, labels: np.ndarray) -> np.ndarray:
        return np.bincount(labels[labels >= 0], minlength=self.n_blocks)


@dataclass
class Partition:
    """Assignment of block indices to a fixed-size worker pool."""

    workers: int
    assignment: List[List[int]]

    @classmethod
    def default(cls, n_blocks: int, workers: int) -> "Partition":
        workers = max(1, int(workers))
        assignment = [[i for i in range(n_blocks) if i % workers == w]
                      for w in range(workers)]
        return cls(workers, assignment)

    def validate(self, n_blocks: int) -> None:
        seen = sorted(i for part in self.assignment for i in part)
        if seen != list(range(n_blocks)):
            raise ValueError("partition is not a disjoint cover of the blocks")


@dataclass
class ArrowheadSystem:
    """Permuted bordered block-diagonal system with scatter indices."""

    a_blocks: List[sp.csc_matrix]
    borders: List[sp.csr_matrix]          # n_coupling x dim(block)
    c_block: sp.csc_matrix
    block_indices: List[np.ndarray]       # original indices per block
    coupling_indices: np.ndarray
    dim: int
    rhs: Optional[np.ndarray] = None

    @property
    def n_blocks(self) -> int:
        return len(self.a_blocks)

    @property
    def n_coupling(self) -> int:
        return self.coupling_indices.size

    def set_rhs(self, rhs: np.ndarray) -> None:
        self.rhs = np.asarray(rhs, dtype=float)

    def split_rhs(self, rhs: np.ndarray):
        parts = [rhs[idx] for idx in self.block_indices]
        return parts, rhs[self.coupling_indices]

    def scatter(self, du_blocks, du_g) -> np.ndarray:
        out = np.zeros(self.dim)
        for idx, du in zip(self.block_indices, du_blocks):
            out[idx] = du
        out[self.coupling_indices] = du_g
        return out


def permute_to_arrowhead(kkt, block_map, rhs: Optional[np.ndarray] = None
                         ) -> ArrowheadSystem:
    """Split a (condensed) KKT operator into arrowhead blocks.

    kkt may be a ReducedKkt or any square sparse matrix; block_map may
    be a BlockMap (labels derived from the problem annotation) or a raw
    label vector over the operator's rows. Any nonzero linking two
    different non-coupling blocks is a structure violation.
    """
    matrix = kkt.matrix if hasattr(kkt, "matrix") else sp.csc_matrix(kkt)
    if isinstance(block_map, BlockMap):
        labels = block_map.reduced_labels(kkt)
        n_blocks = block_map.n_blocks
    else:
        labels = np.asarray(block_map, dtype=int)
        n_blocks = int(labels.max()) + 1 if labels.size and labels.max() >= 0 else 0
    if labels.size != matrix.shape[0]:
        raise ValueError(f"block labels cover {labels.size} rows, "
                         f"operator has {matrix.shape[0]}")

    coo = matrix.tocoo()
    lr, lc = labels[coo.row], labels[coo.col]
    bad = (lr != lc) & (lr != COUPLING) & (lc != COUPLING) & (coo.data != 0)
    if bad.any():
        k = int(np.flatnonzero(bad)[0])
        raise StructureViolation(
            f"entry ({coo.row[k]}, {coo.col[k]}) links block {lr[k]} "
            f"and block {lc[k]}")

    csr = matrix.tocsr()
    block_indices = [np.flatnonzero(labels == i) for i in range(n_blocks)]
    coupling = np.flatnonzero(labels == COUPLING)
    a_blocks = [csr[idx][:, idx].tocsc() for idx in block_indices]
    borders = [csr[coupling][:, idx].tocsr() for idx in block_indices]
    c_block = csr[coupling][:, coupling].tocsc()
    return ArrowheadSystem(a_blocks, borders, c_block, block_indices,
                           coupling, matrix.shape[0], rhs)


def local_contribution(a_i, b_i, mode: str = "backsolve") -> np.ndarray:
    """Dense S_i = B_i A_i^{-1} B_i^T by back-solves or by partial
    factorization of the augmented matrix; the two agree to rounding."""
    b = b_i.toarray() if sp.issparse(b_i) else np.asarray(b_i, dtype=float)
    if mode == "backsolve":
        fac = a_i if isinstance(a_i, linalg.SymIndefFactor) else _factor_block(a_i)
        if b.shape[0] == 0 or b.shape[1] == 0 or not np.any(b):
            return np.zeros((b.shape[0], b.shape[0]))
        s_i = b @ fac.solve(b.T)
    elif mode == "augmented":
        a = a_i.to_sparse_sym() if hasattr(a_i, "to_sparse_sym") else a_i
        if isinstance(a, linalg.SymIndefFactor):
            raise ValueError("augmented mode needs the block matrix, not a factor")
        s_i = -linalg.partial_factor_augmented(_as_sym(a), b)
    else:
        raise ValueError(f"unknown sc_mode {mode!r}")
    return 0.5 * (s_i + s_i.T)


def _as_sym(a) -> linalg.SparseSym:
    if isinstance(a, linalg.SparseSym):
        return a
    if sp.issparse(a):
        return linalg.SparseSym.from_sparse(a)
    return linalg.SparseSym.from_dense(np.asarray(a, dtype=float))


def _factor_block(a) -> linalg.SymIndefFactor:
    return linalg.factor(_as_sym(a))


@dataclass
class ArrowheadFactor:
    """Factorization state of an arrowhead system plus instrumentation."""

    system: ArrowheadSystem
    partition: Partition
    sc_mode: str
    mem_save: bool
    block_factors: Optional[List[linalg.SymIndefFactor]]
    block_inertias: List[tuple]
    s_dense: np.ndarray
    s_factor: linalg.SymIndefFactor
    s_checksum: str
    timings: dict
    last_residual: float = np.nan

    @property
    def inertia(self) -> tuple:
        return inertia_of(self.system, self.block_inertias, self.s_factor)

    def _block_factor(self, i: int) -> linalg.SymIndefFactor:
        if self.block_factors is not None:
            return self.block_factors[i]
        return _factor_block(self.system.a_blocks[i])

    def solve(self, rhs: Optional[np.ndarray] = None) -> np.ndarray:
        """Steps 8-16: coupling RHS reduction, dense solve, local solves."""
        sys_ = self.system
        if rhs is None:
            rhs = sys_.rhs
        if rhs is None:
            raise ValueError("no right-hand side attached or supplied")
        b_parts, b_c = sys_.split_rhs(np.asarray(rhs, dtype=float))

        t0 = time.perf_counter()
        n_c = sys_.n_coupling

        def rhs_task(idx_list):
            out = {}
            for i in idx_list:
                fac = self._block_factor(i)
                v = fac.solve(b_parts[i]) if b_parts[i].size else b_parts[i]
                out[i] = (sys_.borders[i] @ v if n_c else np.zeros(0), v, fac)
            return out

        per_block = _run_partitioned(self.partition, rhs_task)
        r = np.zeros(n_c)
        for i in range(sys_.n_blocks):
            r += per_block[i][0]
        t1 = time.perf_counter()
        self.timings["sc-rhs"] += t1 - t0

        du_g = self.s_factor.solve(b_c - r) if n_c else np.zeros(0)
        t2 = time.perf_counter()
        self.timings["sc-solve"] += t2 - t1

        def local_task(idx_list):
            out = {}
            for i in idx_list:
                fac = per_block[i][2] if not self.mem_save else self._block_factor(i)
                rhs_i = b_parts[i] - (sys_.borders[i].T @ du_g if n_c else 0.0)
                out[i] = fac.solve(rhs_i) if rhs_i.size else rhs_i
            return out

        if self.mem_save:
            # factors from the RHS pass are not retained; redo them
            per_block = {i: (None, None, None) for i in range(sys_.n_blocks)}
        du_blocks_map = _run_partitioned(self.partition, local_task)
        du_blocks = [du_blocks_map[i] for i in range(sys_.n_blocks)]
        self.timings["local-solve"] += time.perf_counter() - t2

        self.last_residual = _arrowhead_residual(sys_, b_parts, b_c,
                                                 du_blocks, du_g)
        return sys_.scatter(du_blocks, du_g)


def _run_partitioned(partition: Partition, task) -> dict:
    """Run task over each worker's block list; merge the result dicts."""
    results: dict = {}
    if partition.workers <= 1:
        for part in partition.assignment:
            results.update(task(part))
        return results
    with ThreadPoolExecutor(max_workers=partition.workers) as pool:
        for out in pool.map(task, partition.assignment):
            results.update(out)
    return results


def _arrowhead_residual(sys_: ArrowheadSystem, b_parts, b_c,
                        du_blocks, du_g) -> float:
    worst = 0.0
    acc = -np.asarray(b_c, dtype=float)
    if sys_.n_coupling:
        acc = acc + sys_.c_block @ du_g
    for i in range(sys_.n_blocks):
        r_i = sys_.a_blocks[i] @ du_blocks[i] - b_parts[i]
        if sys_.n_coupling:
            r_i = r_i + sys_.borders[i].T @ du_g
            acc = acc + sys_.borders[i] @ du_blocks[i]
        if r_i.size:
            worst = max(worst, float(np.abs(r_i).max()))
    if acc.size:
        worst = max(worst, float(np.abs(acc).max()))
    return worst


def factorize_arrowhead(system: ArrowheadSystem,
                        partition: Optional[Partition] = None,
                        sc_mode: str = "backsolve",
                        mem_save: bool = False) -> ArrowheadFactor:
    """Steps 1-6 of the decomposition: block factors, S assembly, S factor.

    Raises SingularBlockError / SingularScError when a factorization
    reports zero eigenvalues; the interior-point driver reacts with its
    regularization shifts.
    """
    if sc_mode not in ("backsolve", "augmented"):
        raise ValueError(f"unknown sc_mode {sc_mode!r}")
    t0 = time.perf_counter()
    if partition is None:
        partition = Partition.default(system.n_blocks, 1)
    partition.validate(system.n_blocks)
    timings = {k: 0.0 for k in PHASES}
    n_c = system.n_coupling
    timings["init"] += time.perf_counter() - t0

    t1 = time.perf_counter()

    def assemble_task(idx_list):
        out = {}
        for i in idx_list:
            fac = _factor_block(system.a_blocks[i])
            if fac.inertia[2] > 0:
                raise SingularBlockError(i)
            if sc_mode == "backsolve":
                s_i = local_contribution(fac, system.borders[i], "backsolve")
            else:
                s_i = local_contribution(system.a_blocks[i], system.borders[i],
                                         "augmented")
            out[i] = (s_i, fac.inertia, None if mem_save else fac)
        return out

    per_block = _run_partitioned(partition, assemble_task)
    s_dense = system.c_block.toarray() if n_c else np.zeros((0, 0))
    for i in range(system.n_blocks):
        s_dense = s_dense - per_block[i][0]
    block_inertias = [per_block[i][1] for i in range(system.n_blocks)]
    factors = None if mem_save else [per_block[i][2]
                                     for i in range(system.n_blocks)]
    checksum = hashlib.sha256(np.ascontiguousarray(s_dense).tobytes()).hexdigest()
    s_factor = linalg.factor(s_dense)
    if s_factor.inertia[2] > 0:
        raise SingularScError(
            f"Schur complement is singular (inertia {s_factor.inertia})")
    timings["sc-assembly"] += time.perf_counter() - t1
    return ArrowheadFactor(system, partition, sc_mode, mem_save, factors,
                           block_inertias, s_dense, s_factor, checksum, timings)


def solve(system: ArrowheadSystem, partition: Optional[Partition] = None,
          sc_mode: str = "backsolve", mem_save: bool = False) -> np.ndarray:
    """Factorize-and-solve convenience for a system with attached RHS."""
    return factorize_arrowhead(system, partition, sc_mode, mem_save).solve()


def inertia_of(system: ArrowheadSystem, factors, schur_factor) -> tuple:
    """Inertia of the full operator from its block factorizations.

    By the block-factorization congruence the full inertia is the
    component sum of the diagonal-block inertias and the Schur
    complement's inertia. factors may be SymIndefFactor objects or bare
    inertia tuples.
    """
    total = np.array([0, 0, 0])
    for f in factors:
        inert = f.inertia if hasattr(f, "inertia") else tuple(f)
        total += np.array(inert, dtype=int)
    total += np.array(schur_factor.inertia if hasattr(schur_factor, "inertia")
                      else tuple(schur_factor), dtype=int)
    return (int(total[0]), int(total[1]), int(total[2]))
