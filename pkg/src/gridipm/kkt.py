"""KKT system assembly, slack condensation, and direction recovery.

Two views of the same Newton system are maintained:

* the symmetric 4-block form in (dx, ds, dlam_E, dlam_I), obtained by
  pivoting out the bound-dual rows; this is what gets factorized,
  optionally after condensing well-scaled slack rows out as well;
* the unsymmetric full form including the bound-dual rows, used as the
  reference operator for residual checks and iterative refinement.

Inertia-correction shifts enter as +delta_w on the (1,1)/(2,2) diagonals
and -delta_c on both multiplier diagonals, identically in both views.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from .linalg import SparseSym
from .nlp import EvalResult, Iterate, Residuals


@dataclass
class Direction:
    """Primal-dual search direction; dual sides zero where unbounded."""

    dx: np.ndarray
    ds: np.ndarray
    dlam_e: np.ndarray
    dlam_i: np.ndarray
    dz_l: np.ndarray
    dz_u: np.ndarray
    dy_l: np.ndarray
    dy_u: np.ndarray

    def scaled(self, alpha: float) -> "Direction":
        return Direction(*(alpha * v for v in
                           (self.dx, self.ds, self.dlam_e, self.dlam_i,
                            self.dz_l, self.dz_u, self.dy_l, self.dy_u)))

    def combine(self, other: "Direction", weight: float) -> "Direction":
        """self + weight * other, component-wise."""
        return Direction(*(a + weight * b for a, b in zip(
            (self.dx, self.ds, self.dlam_e, self.dlam_i,
             self.dz_l, self.dz_u, self.dy_l, self.dy_u),
            (other.dx, other.ds, other.dlam_e, other.dlam_i,
             other.dz_l, other.dz_u, other.dy_l, other.dy_u))))


@dataclass
class SymmetricKkt:
    """Symmetric 4-block KKT data before any slack condensation.

    h_tilde carries H plus the primal bound condensation term Sigma_x;
    l_s carries the slack condensation diagonal Sigma_s. The inertia
    shifts are stored separately so regularization retries reuse the
    assembled blocks.
    """

    h_tilde: sp.csc_matrix
    l_s: np.ndarray
    j_e: sp.csr_matrix
    j_i: sp.csr_matrix
    delta_w: float
    delta_c: float
    iterate: Iterate
    evals: EvalResult

    @property
    def n_x(self) -> int:
        return self.h_tilde.shape[0]

    @property
    def n_e(self) -> int:
        return self.j_e.shape[0]

    @property
    def n_i(self) -> int:
        return self.j_i.shape[0]

    def with_shifts(self, delta_w: float, delta_c: float) -> "SymmetricKkt":
        """Same assembled blocks under different regularization shifts."""
        return SymmetricKkt(self.h_tilde, self.l_s, self.j_e, self.j_i,
                            delta_w, delta_c, self.iterate, self.evals)


def assemble_symmetric(iterate: Iterate, evals: EvalResult,
                       delta_w: float = 0.0,
                       delta_c: float = 0.0) -> SymmetricKkt:
    """Build the symmetric blocks from an interior iterate.

    Sigma_x sums z/(distance) over the finite bound sides of x, and l_s
    does the same for the slacks; both are strictly positive wherever a
    finite side exists because the iterate is interior with positive
    duals.
    """
    xb, sb = iterate.x_bounds, iterate.s_bounds
    sigma_x = np.zeros(iterate.x.size)
    dxl, dxu = iterate.dist_xl(), iterate.dist_xu()
    np.add.at(sigma_x, xb.idx_lower,
              iterate.z_l[xb.idx_lower] / dxl[xb.idx_lower])
    np.add.at(sigma_x, xb.idx_upper,
              iterate.z_u[xb.idx_upper] / dxu[xb.idx_upper])
    l_s = np.zeros(iterate.s.size)
    dsl, dsu = iterate.dist_sl(), iterate.dist_su()
    np.add.at(l_s, sb.idx_lower, iterate.y_l[sb.idx_lower] / dsl[sb.idx_lower])
    np.add.at(l_s, sb.idx_upper, iterate.y_u[sb.idx_upper] / dsu[sb.idx_upper])
    h_tilde = (evals.h_full + sp.diags(sigma_x)).tocsc()
    return SymmetricKkt(h_tilde, l_s, sp.csr_matrix(evals.j_e),
                        sp.csr_matrix(evals.j_i), float(delta_w),
                        float(delta_c), iterate, evals)


@dataclass
class ReducedKkt:
    """Slack-condensed symmetric operator in (dx, dlam_E, dlam_I, ds_kept)."""

    kkt: SymmetricKkt
    matrix: sp.csc_matrix
    eliminated: np.ndarray      # bool mask over inequality rows
    kept: np.ndarray            # indices of slacks left explicit
    l_s_eff: np.ndarray         # l_s + delta_w, the condensation diagonal

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def slices(self):
        k = self.kkt
        a = k.n_x
        b = a + k.n_e
        c = b + k.n_i
        d = c + self.kept.size
        return slice(0, a), slice(a, b), slice(b, c), slice(c, d)

    @property
    def target_inertia(self):
        """Inertia certifying a descent-generating factorization."""
        k = self.kkt
        return (k.n_x + self.kept.size, k.n_e + k.n_i, 0)

    def to_sym(self) -> SparseSym:
        return SparseSym.from_sparse(self.matrix)


def reduce_slacks(kkt: SymmetricKkt, eps_elim: float = 1e-8,
                  keep_slacks: Optional[np.ndarray] = None,
                  uniform_groups: Optional[np.ndarray] = None) -> ReducedKkt:
    """Condense well-scaled slack rows into the inequality-dual block.

    A slack row i is eliminated when l_s_eff[i] >= eps_elim * max(l_s_eff),
    folding -1/l_s_eff[i] onto the dlam_I diagonal; tiny entries stay
    explicit to avoid dividing by a vanishing pivot. keep_slacks forces
    rows to stay explicit regardless of scale. uniform_groups (integer
    labels, -1 = ungrouped) demotes a whole group to explicit unless
    every member passes the guard, so that structurally repeated blocks
    keep identical dimensions.
    """
    n_x, n_e, n_i = kkt.n_x, kkt.n_e, kkt.n_i
    l_s_eff = kkt.l_s + kkt.delta_w
    if n_i:
        thresh = eps_elim * float(l_s_eff.max())
        elim = l_s_eff >= thresh
    else:
        elim = np.zeros(0, dtype=bool)
    if keep_slacks is not None:
        elim &= ~np.asarray(keep_slacks, dtype=bool)
    if uniform_groups is not None:
        labels = np.asarray(uniform_groups)
        for g in np.unique(labels[labels >= 0]):
            members = labels == g
            elim[members] = bool(elim[members].all())
    kept = np.flatnonzero(~elim)
    n_k = kept.size

    a11 = kkt.h_tilde + kkt.delta_w * sp.eye(n_x, format="csc")
    a22 = -kkt.delta_c * sp.eye(n_e, format="csc")
    fold = np.where(elim, 1.0 / np.where(elim, l_s_eff, 1.0), 0.0)
    a33 = sp.diags(-kkt.delta_c - fold, shape=(n_i, n_i), format="csc")
    sel = sp.csc_matrix((np.ones(n_k), (kept, np.arange(n_k))), shape=(n_i, n_k))
    a44 = sp.diags(l_s_eff[kept], shape=(n_k, n_k), format="csc")
    z = sp.csc_matrix
    matrix = sp.bmat([
        [a11, kkt.j_e.T, kkt.j_i.T, z((n_x, n_k))],
        [kkt.j_e, a22, z((n_e, n_i)), z((n_e, n_k))],
        [kkt.j_i, z((n_i, n_e)), a33, -sel],
        [z((n_k, n_x)), z((n_k, n_e)), -sel.T, a44],
    ], format="csc")
    return ReducedKkt(kkt, matrix, elim, kept, l_s_eff)


def _fold_x(iterate: Iterate, residuals: Residuals) -> np.ndarray:
    """Bound-dual elimination term entering the dx rows of the RHS."""
    xb = iterate.x_bounds
    w = np.zeros(iterate.x.size)
    dxl, dxu = iterate.dist_xl(), iterate.dist_xu()
    np.add.at(w, xb.idx_lower, residuals.le_l / dxl[xb.idx_lower])
    np.subtract.at(w, xb.idx_upper, residuals.le_u / dxu[xb.idx_upper])
    return w


def _fold_s(iterate: Iterate, residuals: Residuals) -> np.ndarray:
    """l_b plus the slack-dual elimination term (the ds-row RHS core)."""
    sb = iterate.s_bounds
    w = np.zeros(iterate.s.size)
    dsl, dsu = iterate.dist_sl(), iterate.dist_su()
    np.add.at(w, sb.idx_lower, residuals.lf_l / dsl[sb.idx_lower])
    np.subtract.at(w, sb.idx_upper, residuals.lf_u / dsu[sb.idx_upper])
    return residuals.l_b + w


def build_rhs(reduced: ReducedKkt, residuals: Residuals) -> np.ndarray:
    """Right-hand side of the condensed system for given residuals."""
    it = reduced.kkt.iterate
    v_s = _fold_s(it, residuals)
    fold_rhs = np.where(reduced.eliminated, v_s / reduced.l_s_eff, 0.0)
    return np.concatenate([
        -(residuals.l_a + _fold_x(it, residuals)),
        -residuals.l_c,
        -(residuals.l_d + fold_rhs),
        -v_s[reduced.kept],
    ])


def recover_directions(reduced: ReducedKkt, solution: np.ndarray,
                       residuals: Residuals) -> Direction:
    """Expand a condensed solve back to the full primal-dual direction.

    Eliminated slacks and all bound duals are reconstructed from their
    pivoted rows; the expansion is exact linear algebra, so the full
    direction satisfies the uncondensed system to factorization accuracy.
    """
    it = reduced.kkt.iterate
    sl_x, sl_le, sl_li, sl_s = reduced.slices
    dx = solution[sl_x]
    dlam_e = solution[sl_le]
    dlam_i = solution[sl_li]
    ds = np.zeros(it.s.size)
    ds[reduced.kept] = solution[sl_s]
    if reduced.eliminated.any():
        v_s = _fold_s(it, residuals)
        e = reduced.eliminated
        ds[e] = (dlam_i[e] - v_s[e]) / reduced.l_s_eff[e]

    xb, sb = it.x_bounds, it.s_bounds
    dz_l = np.zeros(it.x.size)
    dz_u = np.zeros(it.x.size)
    il, iu = xb.idx_lower, xb.idx_upper
    dz_l[il] = -(residuals.le_l + it.z_l[il] * dx[il]) / it.dist_xl()[il]
    dz_u[iu] = -(residuals.le_u - it.z_u[iu] * dx[iu]) / it.dist_xu()[iu]
    dy_l = np.zeros(it.s.size)
    dy_u = np.zeros(it.s.size)
    jl, ju = sb.idx_lower, sb.idx_upper
    dy_l[jl] = -(residuals.lf_l + it.y_l[jl] * ds[jl]) / it.dist_sl()[jl]
    dy_u[ju] = -(residuals.lf_u - it.y_u[ju] * ds[ju]) / it.dist_su()[ju]
    return Direction(dx, ds, dlam_e, dlam_i, dz_l, dz_u, dy_l, dy_u)


@dataclass
class UnsymmetricKkt:
    """Full Newton operator including the bound-complementarity rows.

    Row/column order: x, s, lam_E, lam_I, then the finite bound-dual
    sides z_L, z_U, y_L, y_U in compact (finite-side only) layout.
    """

    matrix: sp.csr_matrix
    iterate: Iterate

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def pack(self, d: Direction) -> np.ndarray:
        it = self.iterate
        xb, sb = it.x_bounds, it.s_bounds
        return np.concatenate([
            d.dx, d.ds, d.dlam_e, d.dlam_i,
            d.dz_l[xb.idx_lower], d.dz_u[xb.idx_upper],
            d.dy_l[sb.idx_lower], d.dy_u[sb.idx_upper],
        ])

    def unpack(self, v: np.ndarray) -> Direction:
        it = self.iterate
        xb, sb = it.x_bounds, it.s_bounds
        n_x, n_i = it.x.size, it.s.size
        n_e = it.lam_e.size
        parts = np.split(v, np.cumsum([
            n_x, n_i, n_e, n_i, xb.idx_lower.size, xb.idx_upper.size,
            sb.idx_lower.size, sb.idx_upper.size])[:-1])
        dz_l = np.zeros(n_x)
        dz_u = np.zeros(n_x)
        dz_l[xb.idx_lower] = parts[4]
        dz_u[xb.idx_upper] = parts[5]
        dy_l = np.zeros(n_i)
        dy_u = np.zeros(n_i)
        dy_l[sb.idx_lower] = parts[6]
        dy_u[sb.idx_upper] = parts[7]
        return Direction(parts[0], parts[1], parts[2], parts[3],
                         dz_l, dz_u, dy_l, dy_u)

    def rhs(self, residuals: Residuals) -> np.ndarray:
        return -np.concatenate([
            residuals.l_a, residuals.l_b, residuals.l_c, residuals.l_d,
            residuals.le_l, residuals.le_u, residuals.lf_l, residuals.lf_u,
        ])

    def residuals_from_rhs(self, v: np.ndarray) -> Residuals:
        """Inverse of rhs(): view an arbitrary right-hand side as Residuals.

        The condensed solve path consumes residual vectors (and negates
        them internally), so refinement corrections reuse it by wrapping
        the current defect r = b - A x as Residuals(-r parts).
        """
        it = self.iterate
        xb, sb = it.x_bounds, it.s_bounds
        n_x, n_i = it.x.size, it.s.size
        n_e = it.lam_e.size
        parts = np.split(-v, np.cumsum([
            n_x, n_i, n_e, n_i, xb.idx_lower.size, xb.idx_upper.size,
            sb.idx_lower.size, sb.idx_upper.size])[:-1])
        return Residuals(parts[0], parts[1], parts[2], parts[3],
                         parts[4], parts[5], parts[6], parts[7])


def build_unsymmetric(kkt: SymmetricKkt) -> UnsymmetricKkt:
    """Assemble the uncondensed operator with the same shifts as kkt."""
    it, ev = kkt.iterate, kkt.evals
    xb, sb = it.x_bounds, it.s_bounds
    n_x, n_e, n_i = kkt.n_x, kkt.n_e, kkt.n_i
    nzl, nzu = xb.idx_lower.size, xb.idx_upper.size
    nyl, nyu = sb.idx_lower.size, sb.idx_upper.size

    def sel(idx, n, m):
        """n x m selector with +1 at (idx[k], k)."""
        return sp.csr_matrix((np.ones(idx.size), (idx, np.arange(idx.size))),
                             shape=(n, m))

    sel_zl = sel(xb.idx_lower, n_x, nzl)
    sel_zu = sel(xb.idx_upper, n_x, nzu)
    sel_yl = sel(sb.idx_lower, n_i, nyl)
    sel_yu = sel(sb.idx_upper, n_i, nyu)
    z = sp.csr_matrix
    h_row = ev.h_full + kkt.delta_w * sp.eye(n_x)
    dxl = it.dist_xl()[xb.idx_lower]
    dxu = it.dist_xu()[xb.idx_upper]
    dsl = it.dist_sl()[sb.idx_lower]
    dsu = it.dist_su()[sb.idx_upper]
    eye_i = sp.eye(n_i, format="csr")
    rows = [
        [h_row, None, kkt.j_e.T, kkt.j_i.T, -sel_zl, sel_zu, None, None],
        [None, kkt.delta_w * eye_i, None, -eye_i, None, None, -sel_yl, sel_yu],
        [kkt.j_e, None, -kkt.delta_c * sp.eye(n_e), None, None, None, None, None],
        [kkt.j_i, -eye_i, None, -kkt.delta_c * eye_i, None, None, None, None],
        [sp.diags(it.z_l[xb.idx_lower], format="csr") @ sel_zl.T, None, None,
         None, sp.diags(dxl, shape=(nzl, nzl)), None, None, None],
        [-sp.diags(it.z_u[xb.idx_upper], format="csr") @ sel_zu.T, None, None,
         None, None, sp.diags(dxu, shape=(nzu, nzu)), None, None],
        [None, sp.diags(it.y_l[sb.idx_lower], format="csr") @ sel_yl.T, None,
         None, None, None, sp.diags(dsl, shape=(nyl, nyl)), None],
        [None, -sp.diags(it.y_u[sb.idx_upper], format="csr") @ sel_yu.T, None,
         None, None, None, None, sp.diags(dsu, shape=(nyu, nyu))],
    ]
    sizes = [n_x, n_i, n_e, n_i, nzl, nzu, nyl, nyu]
    for r, nr in enumerate(sizes):
        for c, nc in enumerate(sizes):
            if rows[r][c] is None:
                rows[r][c] = z((nr, nc))
    return UnsymmetricKkt(sp.bmat(rows, format="csr"), it)


@dataclass
class RefinementResult:
    solution: np.ndarray
    residual_norms: list
    rounds: int
    stagnated: bool


def iterative_refinement(unsym_operator, solution: np.ndarray,
                         rhs: np.ndarray, max_rounds: int = 3,
                         corrector: Callable[[np.ndarray], np.ndarray] = None,
                         tol: float = 0.0) -> RefinementResult:
    """Residual-correction rounds against the uncondensed operator.

    corrector maps a residual vector to a correction (typically a solve
    through the same condensed factorization). A round that shrinks the
    residual infinity norm by less than 10% sets the stagnation flag and
    stops; corrections that make things worse are discarded.
    """
    m = unsym_operator.matrix if hasattr(unsym_operator, "matrix") else unsym_operator
    if corrector is None:
        raise ValueError("iterative_refinement requires a corrector solve")
    x = np.array(solution, dtype=float)
    r = rhs - m @ x
    norms = [float(np.abs(r).max()) if r.size else 0.0]
    stop = tol if tol > 0 else 1e-14 * (1.0 + float(np.abs(rhs).max() if rhs.size else 0.0))
    rounds = 0
    stagnated = False
    while rounds < max_rounds and norms[-1] > stop:
        dx = corrector(r)
        x_new = x + dx
        r_new = rhs - m @ x_new
        rn = float(np.abs(r_new).max()) if r_new.size else 0.0
        rounds += 1
        if rn < norms[-1]:
            x, r = x_new, r_new
            norms.append(rn)
            if rn >= 0.9 * norms[-2]:
                stagnated = True
                break
        else:
            stagnated = True
            norms.append(norms[-1])
            break
    return RefinementResult(x, norms, rounds, stagnated)
