"""Primal-dual interior-point driver with pluggable KKT backends.

The driver iterates: evaluate, assemble the symmetric KKT blocks,
regularize until the factorization certifies descent (inertia count or
curvature test), compute the Newton direction through one of the
linear-solver backends, globalize with a filter line search, and update
the barrier parameter by the selected strategy. The backends share a
small handle protocol (inertia, target, solve_reduced) so the driver is
indifferent to whether directions come from a single sparse
factorization, a block-parallel Schur complement, or the compressed
replicated-block variant for multiperiod coupling.

All internal quantities live in the scaled problem (gradient-based row
and objective scaling frozen at the start point); reported objectives
are unscaled.
"""

from __future__ import annotations

import hashlib
import math
import time
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np
import scipy.sparse as sp

from . import linalg
from .kkt import (Direction, SymmetricKkt, assemble_symmetric, build_rhs,
                  build_unsymmetric, iterative_refinement, recover_directions,
                  reduce_slacks)
from .mpopf_schur import accumulate_global, replicated_contribution, \
    structured_factorize, structured_solve
from .nlp import (Bounds, Iterate, NlpProblem, Residuals, eval_all,
                  eval_functions)
from .schur import (BlockMap, Partition, SchurError, SingularBlockError,
                    SingularScError, StructureViolation, factorize_arrowhead,
                    permute_to_arrowhead)

TIMING_KEYS = ("init", "kkt-assembly", "sc-assembly", "sc-solve",
               "local-solve", "function-eval")

# regularization schedule constants
DELTA_W_0 = 1e-4
DELTA_W_MIN = 1e-20
DELTA_W_MAX = 1e40
KAPPA_W_PLUS_FIRST = 100.0
KAPPA_W_PLUS = 8.0
KAPPA_W_MINUS = 1.0 / 3.0
DELTA_C_BAR = 1e-8
KAPPA_C = 0.25

# slack granted in line-search comparisons so that differences at the
# level of floating-point noise never reject a trial point
_LS_EPS = 10.0 * np.finfo(float).eps

_PHASE_TO_REPORT = {"init": "kkt-assembly", "sc-assembly": "sc-assembly",
                    "sc-rhs": "sc-assembly", "sc-solve": "sc-solve",
                    "local-solve": "local-solve"}


class _LinearSolverFailure(Exception):
    """Regularization cap exhausted; surfaces as a report status."""


@dataclass
class IpmOptions:
    """Solver configuration; every constant the algorithm uses is here."""

    eps_tol: float = 1e-6
    mu_0: float = 0.1
    mu_strategy: str = "monotone"        # monotone | mehrotra | quality
    kappa_eps: float = 10.0
    kappa_mu: float = 0.2
    theta_mu: float = 1.5
    kappa_curv: Optional[float] = None   # None: 1e-8 * max(1, ||d||)
    inertia_mode: str = "inertia"        # inertia | curvature
    g_max: float = 100.0
    s_max: float = 100.0
    sigma_min: float = 1e-3
    sigma_max: float = 10.0
    max_iter: int = 100
    linear_solver: str = "direct"        # direct | schur | schur-structured
    sc_mode: str = "backsolve"
    workers: int = 1
    mem_save: bool = False
    scale: bool = True
    # filter line-search constants
    eta_phi: float = 1e-8
    gamma_theta: float = 1e-5
    gamma_phi: float = 1e-5
    s_phi: float = 2.3
    s_theta: float = 1.1
    delta_switch: float = 1.0
    max_backtracks: int = 60
    kappa_init: float = 1e-2

    def __post_init__(self):
        if not 0.0 < self.kappa_mu < 1.0:
            raise ValueError("kappa_mu must lie in (0, 1)")
        if not 1.0 < self.theta_mu < 2.0:
            raise ValueError("theta_mu must lie in (1, 2)")
        if self.eps_tol <= 0.0:
            raise ValueError("eps_tol must be positive")
        if self.mu_strategy not in ("monotone", "mehrotra", "quality"):
            raise ValueError(f"unknown mu_strategy {self.mu_strategy!r}")
        if self.inertia_mode not in ("inertia", "curvature"):
            raise ValueError(f"unknown inertia_mode {self.inertia_mode!r}")
        if self.linear_solver not in ("direct", "schur", "schur-structured"):
            raise ValueError(f"unknown linear_solver {self.linear_solver!r}")
        if self.sc_mode not in ("backsolve", "augmented"):
            raise ValueError(f"unknown sc_mode {self.sc_mode!r}")
        if not 0.0 < self.sigma_min < self.sigma_max:
            raise ValueError("sigma interval must satisfy 0 < sigma_min < sigma_max")


@dataclass
class ConvergenceReport:
    """Outcome of a solve, in original (unscaled) objective units."""

    status: str         # optimal | max-iter | restoration-failure | linear-solver-failure
    iterate: Optional[Iterate]
    iterations: int
    objective: float
    e_0: float
    log: List[dict]
    timings: dict
    mu_history: List[float] = field(default_factory=list)
    delta_w_count: int = 0
    delta_c_count: int = 0
    sc_checksums: List[str] = field(default_factory=list)
    quality_stats: List[dict] = field(default_factory=list)
    scaling: Optional["Scaling"] = None

    @property
    def success(self) -> bool:
        return self.status == "optimal"


# ---------------------------------------------------------------------------
# residuals and error measures


def compute_residuals(iterate: Iterate, evals, mu: float) -> Residuals:
    """Primal-dual residual vectors at an interior iterate."""
    it = iterate
    xb, sb = it.x_bounds, it.s_bounds
    l_a = (evals.grad + evals.j_e.T @ it.lam_e + evals.j_i.T @ it.lam_i
           - it.z_l + it.z_u)
    l_b = -it.lam_i - it.y_l + it.y_u
    l_c = evals.c_e.copy()
    l_d = evals.c_i - it.s
    il, iu = xb.idx_lower, xb.idx_upper
    jl, ju = sb.idx_lower, sb.idx_upper
    le_l = it.z_l[il] * it.dist_xl()[il] - mu
    le_u = it.z_u[iu] * it.dist_xu()[iu] - mu
    lf_l = it.y_l[jl] * it.dist_sl()[jl] - mu
    lf_u = it.y_u[ju] * it.dist_su()[ju] - mu
    return Residuals(np.asarray(l_a).ravel(), l_b, l_c, l_d,
                     le_l, le_u, lf_l, lf_u)


def _unit_residuals(iterate: Iterate) -> Residuals:
    """d/d(mu) of the residual vector: -1 on every complementarity row."""
    it = iterate
    xb, sb = it.x_bounds, it.s_bounds
    return Residuals(np.zeros(it.x.size), np.zeros(it.s.size),
                     np.zeros(it.lam_e.size), np.zeros(it.s.size),
                     -np.ones(xb.idx_lower.size), -np.ones(xb.idx_upper.size),
                     -np.ones(sb.idx_lower.size), -np.ones(sb.idx_upper.size))


def _complementarity_products(x, s, z_l, z_u, y_l, y_u, xb: Bounds,
                              sb: Bounds) -> np.ndarray:
    il, iu = xb.idx_lower, xb.idx_upper
    jl, ju = sb.idx_lower, sb.idx_upper
    return np.concatenate([
        z_l[il] * (x - xb.lower)[il],
        z_u[iu] * (xb.upper - x)[iu],
        y_l[jl] * (s - sb.lower)[jl],
        y_u[ju] * (sb.upper - s)[ju],
    ])


def duality_measure(iterate: Iterate) -> float:
    """Average pairwise complementarity over the finite bound sides."""
    it = iterate
    prods = _complementarity_products(it.x, it.s, it.z_l, it.z_u,
                                      it.y_l, it.y_u, it.x_bounds, it.s_bounds)
    if prods.size == 0:
        raise ValueError("no bounded directions")
    return float(prods.sum() / prods.size)


def _dual_scalings(multipliers: Iterate, s_max: float):
    it = multipliers
    zy = (np.abs(it.z_l).sum() + np.abs(it.z_u).sum()
          + np.abs(it.y_l).sum() + np.abs(it.y_u).sum())
    lam = np.abs(it.lam_e).sum() + np.abs(it.lam_i).sum()
    n_x, n_i, n_e = it.x.size, it.s.size, it.lam_e.size
    d1 = n_e + n_i + n_x + n_i
    d2 = n_x + n_i
    s1 = max(s_max, (lam + zy) / d1) / s_max if d1 else 1.0
    s2 = max(s_max, zy / d2) / s_max if d2 else 1.0
    return s1, s2


def optimality_error(residuals: Residuals, scaled: bool,
                     multipliers: Optional[Iterate] = None,
                     s_max: float = 100.0) -> float:
    """Max-norm optimality error, optionally with multiplier scaling.

    The scaled form divides the dual-feasibility norms by s1 and the
    complementarity norms by s2, both ratios floored at 1 so a well
    scaled problem is measured unchanged.
    """
    n = residuals.norms_inf()
    if not scaled:
        return max(n.values())
    if multipliers is None:
        raise ValueError("scaled error needs the multiplier iterate")
    s1, s2 = _dual_scalings(multipliers, s_max)
    return max(n["l_a"] / s1, n["l_b"] / s1, n["l_c"], n["l_d"],
               n["l_e"] / s2, n["l_f"] / s2)


# ---------------------------------------------------------------------------
# step-length machinery


def fraction_to_boundary(v, dv, lower, upper, tau_ftb: float) -> float:
    """Largest step keeping a fraction tau_ftb of every bound distance.

    For each component with a finite bound the accepted step satisfies
    v + alpha*dv - lower >= tau_ftb * (v - lower) (mirrored above), so
    tau_ftb = 0 allows stepping exactly onto the boundary and values
    near 1 barely move.
    """
    v = np.asarray(v, dtype=float)
    dv = np.asarray(dv, dtype=float)
    lower = np.broadcast_to(np.asarray(lower, dtype=float), v.shape)
    upper = np.broadcast_to(np.asarray(upper, dtype=float), v.shape)
    alpha = 1.0
    lo = np.isfinite(lower) & (dv < 0)
    if lo.any():
        alpha = min(alpha, float(np.min(
            (1.0 - tau_ftb) * (v[lo] - lower[lo]) / (-dv[lo]))))
    up = np.isfinite(upper) & (dv > 0)
    if up.any():
        alpha = min(alpha, float(np.min(
            (1.0 - tau_ftb) * (upper[up] - v[up]) / dv[up])))
    return alpha


def _primal_alpha(iterate: Iterate, d: Direction, retain: float) -> float:
    a = fraction_to_boundary(iterate.x, d.dx, iterate.x_bounds.lower,
                             iterate.x_bounds.upper, retain)
    if iterate.s.size:
        a = min(a, fraction_to_boundary(iterate.s, d.ds,
                                        iterate.s_bounds.lower,
                                        iterate.s_bounds.upper, retain))
    return a


def _dual_alpha(iterate: Iterate, d: Direction, retain: float) -> float:
    it = iterate
    xb, sb = it.x_bounds, it.s_bounds
    a = 1.0
    for v, dv, idx in ((it.z_l, d.dz_l, xb.idx_lower),
                       (it.z_u, d.dz_u, xb.idx_upper),
                       (it.y_l, d.dy_l, sb.idx_lower),
                       (it.y_u, d.dy_u, sb.idx_upper)):
        if idx.size:
            a = min(a, fraction_to_boundary(v[idx], dv[idx], 0.0, np.inf,
                                            retain))
    return a


def _retain_fraction(mu: float) -> float:
    """Retained bound-distance fraction; shrinks with the barrier."""
    return min(0.01, mu)


# ---------------------------------------------------------------------------
# merit measures and the filter


def _theta_of(c_e: np.ndarray, c_i: np.ndarray, s: np.ndarray) -> float:
    return float(np.abs(c_e).sum() + np.abs(c_i - s).sum())


def theta(iterate: Iterate, evals) -> float:
    """One-norm constraint violation."""
    return _theta_of(evals.c_e, evals.c_i, iterate.s)


def _barrier_distances(x, s, xb: Bounds, sb: Bounds) -> np.ndarray:
    return np.concatenate([
        (x - xb.lower)[xb.idx_lower], (xb.upper - x)[xb.idx_upper],
        (s - sb.lower)[sb.idx_lower], (sb.upper - s)[sb.idx_upper],
    ])


def _phi_of(f: float, x, s, xb: Bounds, sb: Bounds, mu: float) -> float:
    dists = _barrier_distances(x, s, xb, sb)
    if np.any(dists <= 0.0):
        raise ValueError("barrier undefined")
    if dists.size == 0:
        return float(f)
    return float(f - mu * np.log(dists).sum())


def phi(iterate: Iterate, evals, mu: float) -> float:
    """Barrier objective; raises on boundary or exterior points."""
    return _phi_of(evals.f, iterate.x, iterate.s, iterate.x_bounds,
                   iterate.s_bounds, mu)


def _phi_gradient_dot(iterate: Iterate, evals, mu: float,
                      d: Direction) -> float:
    """Directional derivative of phi along the primal direction."""
    it = iterate
    xb, sb = it.x_bounds, it.s_bounds
    gx = evals.grad.astype(float).copy()
    il, iu = xb.idx_lower, xb.idx_upper
    gx[il] -= mu / it.dist_xl()[il]
    gx[iu] += mu / it.dist_xu()[iu]
    gs = np.zeros(it.s.size)
    jl, ju = sb.idx_lower, sb.idx_upper
    gs[jl] -= mu / it.dist_sl()[jl]
    gs[ju] += mu / it.dist_su()[ju]
    return float(gx @ d.dx + gs @ d.ds)


class Filter:
    """Antichain of (theta, phi) pairs forbidding dominated trials."""

    def __init__(self):
        self.entries: List[tuple] = []

    def __len__(self) -> int:
        return len(self.entries)

    def dominates(self, theta_t: float, phi_t: float) -> bool:
        return any(theta_t >= te and phi_t >= pe for te, pe in self.entries)

    def add(self, theta_e: float, phi_e: float) -> None:
        if self.dominates(theta_e, phi_e):
            return                      # region already forbidden
        self.entries = [e for e in self.entries
                        if not (e[0] >= theta_e and e[1] >= phi_e)]
        self.entries.append((theta_e, phi_e))

    def reset(self) -> None:
        self.entries.clear()


@dataclass
class LineSearchResult:
    """Accepted trial data, or a restoration signal when not accepted."""

    accepted: bool
    alpha: float = 0.0
    x: Optional[np.ndarray] = None
    s: Optional[np.ndarray] = None
    f: float = np.nan
    c_e: Optional[np.ndarray] = None
    c_i: Optional[np.ndarray] = None
    f_type: bool = False


def filter_line_search(iterate: Iterate, direction: Direction, filt: Filter,
                       alpha_max: float, mu: float, problem: NlpProblem,
                       evals, options: IpmOptions, theta_min: float,
                       theta_max: float,
                       timings: Optional[dict] = None) -> LineSearchResult:
    """Backtracking filter search over alpha_i = 2^-i * alpha_max.

    A trial is accepted when it is not dominated by the filter and
    either satisfies the Armijo condition on phi (taken when the
    current violation is small and the switching condition predicts
    enough objective progress) or sufficiently decreases one of theta,
    phi. Acceptances that are not Armijo-based augment the filter.
    Non-finite or exterior trials just continue the backtracking; an
    unaccepted final trial signals restoration.
    """
    it = iterate
    opts = options
    theta_k = _theta_of(evals.c_e, evals.c_i, it.s)
    phi_k = _phi_of(evals.f, it.x, it.s, it.x_bounds, it.s_bounds, mu)
    gphi_d = _phi_gradient_dot(it, evals, mu, direction)

    for i in range(opts.max_backtracks):
        alpha = alpha_max * (0.5 ** i)
        x_t = it.x + alpha * direction.dx
        s_t = it.s + alpha * direction.ds
        t0 = time.perf_counter()
        fe = eval_functions(problem, x_t)
        if timings is not None:
            timings["function-eval"] += time.perf_counter() - t0
        if fe is None:
            continue
        f_t, c_e_t, c_i_t = fe
        if not (it.x_bounds.interior(x_t) and it.s_bounds.interior(s_t)):
            continue
        theta_t = _theta_of(c_e_t, c_i_t, s_t)
        try:
            phi_t = _phi_of(f_t, x_t, s_t, it.x_bounds, it.s_bounds, mu)
        except ValueError:
            continue
        if theta_t >= theta_max:
            continue
        if filt.dominates(theta_t, phi_t):
            continue
        switching = (gphi_d < 0.0 and
                     alpha * (-gphi_d) ** opts.s_phi
                     > opts.delta_switch * theta_k ** opts.s_theta)
        # comparisons carry a relative-rounding allowance; near a
        # solution the predicted decrease drops below fp noise in phi
        # and a bare Armijo test would reject every trial
        eps_phi = _LS_EPS * max(1.0, abs(phi_k))
        eps_theta = _LS_EPS * max(1.0, theta_k)
        if theta_k <= theta_min and switching:
            accept = phi_t <= phi_k + opts.eta_phi * alpha * gphi_d + eps_phi
            f_type = accept
        else:
            accept = (theta_t <= (1.0 - opts.gamma_theta) * theta_k + eps_theta
                      or phi_t <= phi_k - opts.gamma_phi * theta_k + eps_phi)
            f_type = False
        if accept:
            if not f_type:
                filt.add((1.0 - opts.gamma_theta) * theta_k,
                         phi_k - opts.gamma_phi * theta_k)
            return LineSearchResult(True, alpha, x_t, s_t, f_t, c_e_t, c_i_t,
                                    f_type)
    return LineSearchResult(False)


# ---------------------------------------------------------------------------
# regularization


@dataclass
class _RegState:
    delta_w_last: float = 0.0


class _DeltaSchedule:
    """Escalating delta_w trial values, seeded from the last success."""

    def __init__(self, state: _RegState):
        self.state = state
        self.first_ever = state.delta_w_last == 0.0
        self.value = 0.0
        self._bumped = False

    def bump(self) -> None:
        if not self._bumped:
            self.value = (DELTA_W_0 if self.first_ever
                          else max(DELTA_W_MIN,
                                   self.state.delta_w_last * KAPPA_W_MINUS))
            self._bumped = True
        else:
            self.value *= KAPPA_W_PLUS_FIRST if self.first_ever else KAPPA_W_PLUS
        if self.value > DELTA_W_MAX:
            raise _LinearSolverFailure(
                f"delta_w exceeded {DELTA_W_MAX:g} without producing a "
                "usable factorization")

    def accept(self) -> None:
        if self.value > 0.0:
            self.state.delta_w_last = self.value


@dataclass
class CorrectionResult:
    handle: object
    delta_w: float
    delta_c: float
    trials: int


def curvature_test(direction: Direction, w_blocks, delta: float,
                   kappa: Optional[float] = None) -> bool:
    """d'W(delta)d >= kappa d'd on the primal part of the direction.

    w_blocks is (H_tilde, l_s): the condensed Hessian block and the
    slack diagonal, so W(delta) = blkdiag(H_tilde, diag(l_s)) + delta*I.
    """
    h_x, l_s = w_blocks
    dx, ds = direction.dx, direction.ds
    d2 = float(dx @ dx + ds @ ds)
    if d2 == 0.0:
        return True
    wd = float(dx @ (h_x @ dx)) + float(ds @ (np.asarray(l_s) * ds))
    wd += delta * d2
    if kappa is None:
        kappa = 1e-8 * max(1.0, math.sqrt(d2))
    return wd >= kappa * d2


def inertia_correction(kkt: SymmetricKkt, linsol, mu: float,
                       state: Optional[_RegState] = None) -> CorrectionResult:
    """Find shifts (delta_w, delta_c) giving the target inertia.

    Trial schedule: (0, 0) first; a singular factorization turns on
    delta_c = DELTA_C_BAR * mu^KAPPA_C; wrong inertia bumps delta_w
    starting from DELTA_W_0 (first use ever) or a third of the last
    successful value, escalating multiplicatively until DELTA_W_MAX,
    beyond which the linear solver is declared failed.
    """
    state = state if state is not None else _RegState()

    def attempt(dw, dc):
        try:
            handle = linsol.factorize(kkt.with_shifts(dw, dc))
        except (linalg.FactorizationError, SchurError):
            return None, True
        return handle, handle.inertia[2] > 0

    sched = _DeltaSchedule(state)
    delta_c = 0.0
    trials = 0
    while True:
        handle, singular = attempt(sched.value, delta_c)
        trials += 1
        if (handle is not None and not singular
                and tuple(handle.inertia) == tuple(handle.target)):
            sched.accept()
            return CorrectionResult(handle, sched.value, delta_c, trials)
        if singular and delta_c == 0.0:
            delta_c = DELTA_C_BAR * mu ** KAPPA_C
            continue
        sched.bump()


# ---------------------------------------------------------------------------
# barrier updates


def update_mu_monotone(mu: float, eps_tol: float, kappa_mu: float = 0.2,
                       theta_mu: float = 1.5) -> float:
    """Superlinear decrease floored at a tenth of the tolerance."""
    return max(eps_tol / 10.0, min(kappa_mu * mu, mu ** theta_mu))


def update_mu_mehrotra(iterate: Iterate, affine_direction: Direction,
                       mu_min: float = 0.0) -> float:
    """Predictor-corrector centering: mu = (tau_aff/tau)^3 * tau."""
    it = iterate
    tau = duality_measure(it)
    alpha_p = _primal_alpha(it, affine_direction, 0.0)
    alpha_d = _dual_alpha(it, affine_direction, 0.0)
    d = affine_direction
    prods = _complementarity_products(
        it.x + alpha_p * d.dx, it.s + alpha_p * d.ds,
        it.z_l + alpha_d * d.dz_l, it.z_u + alpha_d * d.dz_u,
        it.y_l + alpha_d * d.dy_l, it.y_u + alpha_d * d.dy_u,
        it.x_bounds, it.s_bounds)
    tau_aff = float(prods.sum() / prods.size)
    sigma = (max(tau_aff, 0.0) / tau) ** 3
    return max(mu_min, sigma * tau)


@dataclass
class QualityResult:
    mu: float
    sigma: float
    sections: int


def update_mu_quality(iterate: Iterate, direction_factory: Callable,
                      sigma_min: float, sigma_max: float,
                      residuals: Optional[Residuals] = None,
                      s_max: float = 100.0,
                      mu_min: float = 0.0) -> QualityResult:
    """Pick the centering parameter minimizing a step-quality measure.

    q(sigma) is the max of the scaled dual, primal, and complementarity
    infeasibility norms predicted at the fraction-to-the-boundary trial
    point of the direction for that sigma; the linear residual parts
    shrink by (1 - alpha), the complementarity part is evaluated
    exactly. Golden-section search with at most 12 interval reductions.
    """
    it = iterate
    tau = duality_measure(it)
    s1, s2 = _dual_scalings(it, s_max)
    if residuals is not None:
        nrm = residuals.norms_inf()
        dual_norm = max(nrm["l_a"], nrm["l_b"])
        primal_norm = max(nrm["l_c"], nrm["l_d"])
    else:
        dual_norm = primal_norm = 0.0

    def q(sigma: float) -> float:
        d = direction_factory(sigma)
        retain = _retain_fraction(sigma * tau)
        alpha_p = _primal_alpha(it, d, retain)
        alpha_d = _dual_alpha(it, d, retain)
        prods = _complementarity_products(
            it.x + alpha_p * d.dx, it.s + alpha_p * d.ds,
            it.z_l + alpha_d * d.dz_l, it.z_u + alpha_d * d.dz_u,
            it.y_l + alpha_d * d.dy_l, it.y_u + alpha_d * d.dy_u,
            it.x_bounds, it.s_bounds)
        comp = float(np.abs(prods).max()) if prods.size else 0.0
        return max((1.0 - alpha_d) * dual_norm / s1,
                   (1.0 - alpha_p) * primal_norm,
                   comp / s2)

    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = float(sigma_min), float(sigma_max)
    c = b - invphi * (b - a)
    d_pt = a + invphi * (b - a)
    qc, qd = q(c), q(d_pt)
    sections = 0
    while sections < 12 and (b - a) > 1e-9:
        sections += 1
        if qc <= qd:
            b, d_pt, qd = d_pt, c, qc
            c = b - invphi * (b - a)
            qc = q(c)
        else:
            a, c, qc = c, d_pt, qd
            d_pt = a + invphi * (b - a)
            qd = q(d_pt)
    sigma_star = 0.5 * (a + b)
    return QualityResult(max(mu_min, sigma_star * tau), sigma_star, sections)


# ---------------------------------------------------------------------------
# scaling


@dataclass
class Scaling:
    """Gradient-based row/objective scaling frozen at the start point."""

    s_f: float
    s_g: np.ndarray
    s_h: np.ndarray

    @classmethod
    def identity(cls, n_e: int, n_i: int) -> "Scaling":
        return cls(1.0, np.ones(n_e), np.ones(n_i))


def _row_inf_norms(j: sp.spmatrix) -> np.ndarray:
    if j.shape[0] == 0:
        return np.zeros(0)
    m = np.abs(sp.csr_matrix(j)).max(axis=1)
    return np.asarray(m.todense()).ravel()


def _scale_factor(norms: np.ndarray, g_max: float) -> np.ndarray:
    safe = np.where(norms > 0.0, norms, 1.0)
    return np.where(norms > 0.0, np.minimum(1.0, g_max / safe), 1.0)


def compute_scaling(problem: NlpProblem, x_0: np.ndarray,
                    g_max: float) -> Scaling:
    """min(1, g_max/||gradient row||_inf) per row, zero rows left alone."""
    ev = problem.evaluator
    g = np.asarray(ev.gradient(x_0), dtype=float)
    gn = float(np.abs(g).max()) if g.size else 0.0
    s_f = float(_scale_factor(np.array([gn]), g_max)[0])
    s_g = _scale_factor(_row_inf_norms(ev.eq_jacobian(x_0)), g_max)
    s_h = _scale_factor(_row_inf_norms(ev.ineq_jacobian(x_0)), g_max)
    return Scaling(s_f, s_g, s_h)


class _ScaledEvaluator:
    """Applies frozen row scalings around an inner evaluator."""

    def __init__(self, inner, scaling: Scaling):
        self.inner = inner
        self.scaling = scaling
        self._dg = sp.diags(scaling.s_g) if scaling.s_g.size else sp.csr_matrix((0, 0))
        self._dh = sp.diags(scaling.s_h) if scaling.s_h.size else sp.csr_matrix((0, 0))

    def objective(self, x):
        return self.scaling.s_f * self.inner.objective(x)

    def gradient(self, x):
        return self.scaling.s_f * np.asarray(self.inner.gradient(x), dtype=float)

    def eq_constraints(self, x):
        return self.scaling.s_g * np.asarray(self.inner.eq_constraints(x), dtype=float)

    def ineq_constraints(self, x):
        return self.scaling.s_h * np.asarray(self.inner.ineq_constraints(x), dtype=float)

    def eq_jacobian(self, x):
        j = sp.csr_matrix(self.inner.eq_jacobian(x))
        return self._dg @ j if j.shape[0] else j

    def ineq_jacobian(self, x):
        j = sp.csr_matrix(self.inner.ineq_jacobian(x))
        return self._dh @ j if j.shape[0] else j

    def lagrangian_hessian(self, x, lam_e, lam_i, obj_scale=1.0):
        sc = self.scaling
        return self.inner.lagrangian_hessian(x, sc.s_g * lam_e, sc.s_h * lam_i,
                                             obj_scale * sc.s_f)


def apply_scaling(problem: NlpProblem, scaling: Scaling) -> NlpProblem:
    """Scaled clone of the problem; inequality bounds move with s_h."""
    sb = problem.s_bounds
    return NlpProblem(problem.n_x, problem.n_e, problem.n_i,
                      problem.x_bounds,
                      Bounds(scaling.s_h * sb.lower, scaling.s_h * sb.upper),
                      _ScaledEvaluator(problem.evaluator, scaling),
                      problem.structure, problem.start, problem.name)


# ---------------------------------------------------------------------------
# initialization


def _project_interior(v: np.ndarray, b: Bounds, kappa: float) -> np.ndarray:
    lo, up = b.lower, b.upper
    fin_lo, fin_up = b.has_lower, b.has_upper
    width = up - lo
    p_lo = np.where(fin_lo, kappa * np.maximum(1.0, np.abs(np.where(fin_lo, lo, 0.0))), 0.0)
    p_up = np.where(fin_up, kappa * np.maximum(1.0, np.abs(np.where(fin_up, up, 0.0))), 0.0)
    both = fin_lo & fin_up
    p_lo = np.where(both, np.minimum(p_lo, kappa * width), p_lo)
    p_up = np.where(both, np.minimum(p_up, kappa * width), p_up)
    lo_eff = np.where(fin_lo, lo + p_lo, -np.inf)
    up_eff = np.where(fin_up, up - p_up, np.inf)
    out = np.clip(v, lo_eff, up_eff)
    narrow = both & (lo_eff > up_eff)
    if narrow.any():
        out[narrow] = 0.5 * (lo[narrow] + up[narrow])
    return out


def initialize_iterate(problem: NlpProblem, options: IpmOptions) -> Iterate:
    """Strictly interior start: projected primal point, centered duals."""
    xb, sb = problem.x_bounds, problem.s_bounds
    x0 = (np.asarray(problem.start, dtype=float).copy()
          if problem.start is not None else np.zeros(problem.n_x))
    x = _project_interior(x0, xb, options.kappa_init)
    c_i = (np.asarray(problem.evaluator.ineq_constraints(x), dtype=float)
           if problem.n_i else np.zeros(0))
    s = _project_interior(c_i, sb, options.kappa_init)
    mu0 = options.mu_0
    z_l = np.zeros(problem.n_x)
    z_u = np.zeros(problem.n_x)
    y_l = np.zeros(problem.n_i)
    y_u = np.zeros(problem.n_i)
    z_l[xb.idx_lower] = mu0 / (x - xb.lower)[xb.idx_lower]
    z_u[xb.idx_upper] = mu0 / (xb.upper - x)[xb.idx_upper]
    y_l[sb.idx_lower] = mu0 / (s - sb.lower)[sb.idx_lower]
    y_u[sb.idx_upper] = mu0 / (sb.upper - s)[sb.idx_upper]
    return Iterate(x, s, np.zeros(problem.n_e), np.zeros(problem.n_i),
                   z_l, z_u, y_l, y_u, mu0, xb, sb)


# ---------------------------------------------------------------------------
# linear-solver backends


class _DirectHandle:
    def __init__(self, reduced, fac, timings):
        self.reduced = reduced
        self._fac = fac
        self._timings = timings
        self.inertia = fac.inertia
        self.target = reduced.target_inertia
        self.checksum = None

    def solve_reduced(self, rhs: np.ndarray) -> np.ndarray:
        t0 = time.perf_counter()
        out = self._fac.solve(rhs)
        self._timings["local-solve"] += time.perf_counter() - t0
        return out


class DirectBackend:
    """Single sparse symmetric-indefinite factorization of the reduced KKT."""

    def __init__(self, options: IpmOptions, timings: dict):
        self.options = options
        self.timings = timings

    def factorize(self, kkt: SymmetricKkt):
        t0 = time.perf_counter()
        reduced = reduce_slacks(kkt)
        t1 = time.perf_counter()
        self.timings["kkt-assembly"] += t1 - t0
        fac = linalg.factor(reduced.to_sym())
        # no Schur phases exist here; factorization time counts as the
        # local solve work of the one implicit block
        self.timings["local-solve"] += time.perf_counter() - t1
        return _DirectHandle(reduced, fac, self.timings)


class _SchurHandle:
    def __init__(self, reduced, fac, timings):
        self.reduced = reduced
        self._fac = fac
        self._timings = timings
        self.inertia = fac.inertia
        self.target = reduced.target_inertia
        self.checksum = fac.s_checksum
        self._fold()

    def _fold(self):
        for phase, seconds in self._fac.timings.items():
            self._timings[_PHASE_TO_REPORT[phase]] += seconds
            self._fac.timings[phase] = 0.0

    def solve_reduced(self, rhs: np.ndarray) -> np.ndarray:
        # The block-wise elimination loses a few digits when condensed
        # diagonals span many orders of magnitude (late barrier
        # iterations); polishing against the reduced operator restores
        # them at the cost of an occasional extra back-solve.
        out = iterative_refinement(self.reduced, self._fac.solve(rhs), rhs,
                                   corrector=self._fac.solve).solution
        self._fold()
        return out


class SchurBackend:
    """Arrowhead permutation plus the block-parallel Schur solver."""

    def __init__(self, block_map: BlockMap, options: IpmOptions,
                 timings: dict):
        if not isinstance(block_map, BlockMap):
            raise TypeError("schur backend needs a BlockMap structure")
        self.block_map = block_map
        self.options = options
        self.timings = timings
        self.partition = Partition.default(block_map.n_blocks,
                                           max(1, options.workers))

    def factorize(self, kkt: SymmetricKkt):
        bm = self.block_map
        t0 = time.perf_counter()
        reduced = reduce_slacks(kkt, keep_slacks=bm.keep_slacks,
                                uniform_groups=bm.slack_groups)
        system = permute_to_arrowhead(reduced, bm)
        self.timings["kkt-assembly"] += time.perf_counter() - t0
        fac = factorize_arrowhead(system, self.partition,
                                  sc_mode=self.options.sc_mode,
                                  mem_save=self.options.mem_save)
        return _SchurHandle(reduced, fac, self.timings)


class _StructuredHandle:
    def __init__(self, reduced, system, block_factors, sfac, checksum,
                 timings):
        self.reduced = reduced
        self.system = system
        self.block_factors = block_factors
        self.sfac = sfac
        self.checksum = checksum
        self._timings = timings
        bi = [f.inertia for f in block_factors]
        si = sfac.inertia
        self.inertia = tuple(sum(v[k] for v in bi) + si[k] for k in range(3))
        self.target = reduced.target_inertia

    def solve_reduced(self, rhs: np.ndarray) -> np.ndarray:
        # same late-iteration polish as the generic Schur handle
        return iterative_refinement(self.reduced, self._raw_solve(rhs), rhs,
                                    corrector=self._raw_solve).solution

    def _raw_solve(self, rhs: np.ndarray) -> np.ndarray:
        sys_ = self.system
        parts, b_c = sys_.split_rhs(np.asarray(rhs, dtype=float))
        t0 = time.perf_counter()
        vs = [fac.solve(p) if p.size else p
              for fac, p in zip(self.block_factors, parts)]
        r = np.zeros(sys_.n_coupling)
        for border, v in zip(sys_.borders, vs):
            r += border @ v
        t1 = time.perf_counter()
        self._timings["sc-assembly"] += t1 - t0
        du_g = structured_solve(self.sfac, b_c - r)
        t2 = time.perf_counter()
        self._timings["sc-solve"] += t2 - t1
        du_blocks = [fac.solve(p - border.T @ du_g) if p.size else p
                     for fac, p, border in zip(self.block_factors, parts,
                                               sys_.borders)]
        self._timings["local-solve"] += time.perf_counter() - t2
        return sys_.scatter(du_blocks, du_g)


class StructuredBackend:
    """Compressed Schur complement for period-replicated coupling blocks.

    Borders must be column-constant across coupling groups: for block n
    every coupling group before n is empty, group n is the self-coupling
    border C_1, and all groups after n share one replicated border C_0.
    """

    def __init__(self, block_map: BlockMap, options: IpmOptions,
                 timings: dict):
        if not isinstance(block_map, BlockMap):
            raise TypeError("structured backend needs a BlockMap structure")
        self.block_map = block_map
        self.options = options
        self.timings = timings

    def factorize(self, kkt: SymmetricKkt):
        bm = self.block_map
        t0 = time.perf_counter()
        reduced = reduce_slacks(kkt, keep_slacks=bm.keep_slacks,
                                uniform_groups=bm.slack_groups)
        system = permute_to_arrowhead(reduced, bm)
        self.timings["kkt-assembly"] += time.perf_counter() - t0

        n = bm.n_blocks
        n_c = system.n_coupling
        if n <= 0 or n_c % n != 0:
            raise StructureViolation(
                f"coupling size {n_c} is not a multiple of {n} periods")
        m = n_c // n

        t1 = time.perf_counter()
        block_factors = []
        for i, a in enumerate(system.a_blocks):
            fac = linalg.factor(linalg.SparseSym.from_sparse(sp.tril(a)))
            if fac.inertia[2] > 0:
                raise SingularBlockError(i, "singular diagonal block")
            block_factors.append(fac)

        contributions = []
        for i, border in enumerate(system.borders):
            dense = border.toarray()
            if np.any(dense[:i * m]):
                raise StructureViolation(
                    f"block {i} couples to an earlier period")
            c_1 = dense[i * m:(i + 1) * m]
            if i + 1 < n:
                c_0 = dense[(i + 1) * m:(i + 2) * m]
            else:
                c_0 = np.zeros((m, dense.shape[1]))
            for k in range(i + 2, n):
                if not np.array_equal(dense[k * m:(k + 1) * m], c_0):
                    raise StructureViolation(
                        f"block {i} border is not replicated at period {k}")
            contributions.append(replicated_contribution(
                system.a_blocks[i], c_0, c_1, i))
        sc = accumulate_global(contributions, c_corner=system.c_block,
                               n_periods=n)
        checksum = hashlib.sha256(
            sc.s_d.tobytes() + sc.s_o.tobytes()).hexdigest()
        sfac = structured_factorize(sc)
        self.timings["sc-assembly"] += time.perf_counter() - t1
        return _StructuredHandle(reduced, system, block_factors, sfac,
                                 checksum, self.timings)


def _make_backend(problem: NlpProblem, options: IpmOptions, timings: dict):
    if options.linear_solver == "direct":
        return DirectBackend(options, timings)
    structure = problem.structure
    if structure is None:
        raise ValueError(
            f"linear_solver {options.linear_solver!r} requires the problem "
            "to carry a BlockMap structure")
    if options.linear_solver == "schur":
        return SchurBackend(structure, options, timings)
    return StructuredBackend(structure, options, timings)


# ---------------------------------------------------------------------------
# direction computation


def _direction_solver(handle, kkt_shifted: SymmetricKkt):
    """Solve-and-recover closure with iterative refinement built in."""
    unsym = build_unsymmetric(kkt_shifted)

    def solve_residuals(res: Residuals) -> Direction:
        def condensed(r: Residuals) -> Direction:
            sol = handle.solve_reduced(build_rhs(handle.reduced, r))
            return recover_directions(handle.reduced, sol, r)

        d0 = condensed(res)

        def corrector(rhs_vec: np.ndarray) -> np.ndarray:
            return unsym.pack(condensed(unsym.residuals_from_rhs(rhs_vec)))

        ref = iterative_refinement(unsym, unsym.pack(d0), unsym.rhs(res),
                                   corrector=corrector)
        return unsym.unpack(ref.solution)

    return solve_residuals


@dataclass
class _StepData:
    direction: Direction
    mu: float
    mu_changed: bool
    delta_w: float
    delta_c: float
    checksum: Optional[str]


def _compute_step(kkt0: SymmetricKkt, iterate: Iterate, evals,
                  mu: float, options: IpmOptions, backend,
                  state: _RegState, report: ConvergenceReport) -> _StepData:
    """Regularize, factorize, and build the search direction.

    Inertia mode certifies descent through the factorization's inertia
    before any solve; curvature mode accepts any nonsingular
    factorization whose resulting direction passes the curvature test,
    bumping delta_w otherwise. Adaptive barrier strategies reuse the
    factorization for the affine and unit directions and combine them
    linearly for the selected mu.
    """
    mu_min = options.eps_tol / 10.0

    def build_direction(handle, kkt_shifted):
        solver = _direction_solver(handle, kkt_shifted)
        if options.mu_strategy == "monotone":
            return solver(compute_residuals(iterate, evals, mu)), mu
        res_aff = compute_residuals(iterate, evals, 0.0)
        d_aff = solver(res_aff)
        d_unit = solver(_unit_residuals(iterate))
        bounded = iterate.x_bounds.n_finite_sides + iterate.s_bounds.n_finite_sides
        if bounded == 0:
            return d_aff.combine(d_unit, mu_min), mu_min
        if options.mu_strategy == "mehrotra":
            mu_new = update_mu_mehrotra(iterate, d_aff, mu_min)
        else:
            tau = duality_measure(iterate)

            def factory(sigma):
                return d_aff.combine(d_unit, sigma * tau)

            qres = update_mu_quality(iterate, factory, options.sigma_min,
                                     options.sigma_max, residuals=res_aff,
                                     s_max=options.s_max, mu_min=mu_min)
            report.quality_stats.append({"sections": qres.sections,
                                         "sigma": qres.sigma})
            mu_new = qres.mu
        return d_aff.combine(d_unit, mu_new), mu_new

    if options.inertia_mode == "inertia":
        corr = inertia_correction(kkt0, backend, mu, state)
        kkt_s = kkt0.with_shifts(corr.delta_w, corr.delta_c)
        direction, mu_new = build_direction(corr.handle, kkt_s)
        return _StepData(direction, mu_new, mu_new != mu, corr.delta_w,
                         corr.delta_c, getattr(corr.handle, "checksum", None))

    # curvature mode: any nonsingular factorization is a candidate, the
    # direction it yields decides whether delta_w grows
    sched = _DeltaSchedule(state)
    delta_c = 0.0
    while True:
        kkt_s = kkt0.with_shifts(sched.value, delta_c)
        try:
            handle = backend.factorize(kkt_s)
            singular = handle.inertia[2] > 0
        except (linalg.FactorizationError, SchurError):
            handle, singular = None, True
        if handle is not None and not singular:
            direction, mu_new = build_direction(handle, kkt_s)
            if curvature_test(direction, (kkt0.h_tilde, kkt0.l_s),
                              sched.value, options.kappa_curv):
                sched.accept()
                return _StepData(direction, mu_new, mu_new != mu,
                                 sched.value, delta_c,
                                 getattr(handle, "checksum", None))
        elif singular and delta_c == 0.0:
            delta_c = DELTA_C_BAR * mu ** KAPPA_C
            continue
        sched.bump()


# ---------------------------------------------------------------------------
# restoration


def _restore(problem: NlpProblem, iterate: Iterate, mu: float,
             options: IpmOptions, timings: dict) -> Optional[Iterate]:
    """Gauss-Newton infeasibility reduction; None when it stalls.

    Minimizes ||(c_E, c_I - s)||^2 over (x, s) by damped least-norm
    steps, keeping strict interiority with the same
    fraction-to-the-boundary rule. Success rebuilds a centered iterate
    at the restored primal point.
    """
    ev = problem.evaluator
    xb, sb = problem.x_bounds, problem.s_bounds
    x = iterate.x.copy()
    s = iterate.s.copy()

    def violation(x_, s_):
        c_e = np.asarray(ev.eq_constraints(x_), dtype=float)
        c_i = np.asarray(ev.ineq_constraints(x_), dtype=float)
        return np.concatenate([c_e, c_i - s_])

    r = violation(x, s)
    theta_entry = float(np.abs(r).sum())
    if theta_entry == 0.0:
        return None
    target = max(options.eps_tol, 1e-2 * theta_entry)
    theta_c = theta_entry

    for _ in range(40):
        if theta_c <= target:
            break
        j_e = sp.csr_matrix(ev.eq_jacobian(x))
        j_i = sp.csr_matrix(ev.ineq_jacobian(x))
        n_i = problem.n_i
        if n_i:
            jac = sp.bmat([
                [j_e, sp.csr_matrix((problem.n_e, n_i))],
                [j_i, -sp.eye(n_i, format="csr")],
            ], format="csr")
        else:
            jac = j_e
        m = jac.shape[0]
        gram = (jac @ jac.T + 1e-12 * sp.eye(m)).tocsc()
        try:
            fac = linalg.factor(linalg.SparseSym.from_sparse(sp.tril(gram)))
            w = fac.solve(r)
        except linalg.FactorizationError:
            return None
        d = -(jac.T @ w)
        dx, ds = d[:problem.n_x], d[problem.n_x:]
        alpha_max = fraction_to_boundary(x, dx, xb.lower, xb.upper, 0.01)
        if ds.size:
            alpha_max = min(alpha_max, fraction_to_boundary(
                s, ds, sb.lower, sb.upper, 0.01))
        improved = False
        for j in range(30):
            alpha = alpha_max * (0.5 ** j)
            t0 = time.perf_counter()
            try:
                r_t = violation(x + alpha * dx, s + alpha * ds)
            except Exception:   # noqa: BLE001 - evaluator failure rejects trial
                continue
            finally:
                timings["function-eval"] += time.perf_counter() - t0
            if not np.all(np.isfinite(r_t)):
                continue
            theta_t = float(np.abs(r_t).sum())
            if theta_t <= (1.0 - 1e-4 * alpha) * theta_c:
                x = x + alpha * dx
                s = s + alpha * ds
                r, theta_c = r_t, theta_t
                improved = True
                break
        if not improved:
            return None

    if theta_c > target:
        return None
    # rebuild a centered iterate at the restored point
    s_new = _project_interior(np.asarray(ev.ineq_constraints(x), dtype=float)
                              if problem.n_i else np.zeros(0),
                              sb, options.kappa_init)
    x = _project_interior(x, xb, 1e-12)
    z_l = np.zeros(problem.n_x)
    z_u = np.zeros(problem.n_x)
    y_l = np.zeros(problem.n_i)
    y_u = np.zeros(problem.n_i)
    z_l[xb.idx_lower] = mu / (x - xb.lower)[xb.idx_lower]
    z_u[xb.idx_upper] = mu / (xb.upper - x)[xb.idx_upper]
    y_l[sb.idx_lower] = mu / (s_new - sb.lower)[sb.idx_lower]
    y_u[sb.idx_upper] = mu / (sb.upper - s_new)[sb.idx_upper]
    return Iterate(x, s_new, np.zeros(problem.n_e), np.zeros(problem.n_i),
                   z_l, z_u, y_l, y_u, mu, xb, sb)


# ---------------------------------------------------------------------------
# driver


def _timed_eval(problem, iterate, timings, obj_scale=1.0):
    t0 = time.perf_counter()
    out = eval_all(problem, iterate.x, iterate.lam_e, iterate.lam_i, obj_scale)
    timings["function-eval"] += time.perf_counter() - t0
    return out


def _log_row(k, objective, residuals, mu, alpha, delta_w):
    n = residuals.norms_inf()
    return {"iter": k, "objective": objective,
            "inf_pr": max(n["l_c"], n["l_d"]),
            "inf_du": max(n["l_a"], n["l_b"]),
            "mu": mu, "alpha": alpha, "delta_w": delta_w}


def solve(problem: NlpProblem,
          options: Optional[IpmOptions] = None) -> ConvergenceReport:
    """Run the interior-point iteration on a validated problem."""
    opts = options if options is not None else IpmOptions()
    t_start = time.perf_counter()
    timings = {k: 0.0 for k in TIMING_KEYS}

    if opts.scale:
        x_ref = (np.asarray(problem.start, dtype=float)
                 if problem.start is not None else np.zeros(problem.n_x))
        scaling = compute_scaling(problem, x_ref, opts.g_max)
    else:
        scaling = Scaling.identity(problem.n_e, problem.n_i)
    sprob = apply_scaling(problem, scaling)

    report = ConvergenceReport(status="max-iter", iterate=None, iterations=0,
                               objective=np.nan, e_0=np.nan, log=[],
                               timings=timings, scaling=scaling)
    backend = _make_backend(sprob, opts, timings)
    state = _RegState()
    mu = opts.mu_0
    mu_min = opts.eps_tol / 10.0

    it = initialize_iterate(sprob, opts)
    evals = _timed_eval(sprob, it, timings)
    if not evals.ok:
        raise ValueError(f"start point not evaluable: {evals.error or evals.status}")

    theta_0 = theta(it, evals)
    theta_min = 1e-4 * max(1.0, theta_0)
    theta_max = 1e4 * max(1.0, theta_0)
    filt = Filter()
    timings["init"] += time.perf_counter() - t_start

    alpha_last, dw_last = 0.0, 0.0
    completed = 0
    e0 = np.inf
    report.mu_history.append(mu)

    for k in range(opts.max_iter):
        res0 = compute_residuals(it, evals, 0.0)
        e0 = optimality_error(res0, True, it, s_max=opts.s_max)
        report.log.append(_log_row(k, evals.f / scaling.s_f, res0, mu,
                                   alpha_last, dw_last))
        if e0 <= opts.eps_tol:
            report.status = "optimal"
            break

        if opts.mu_strategy == "monotone":
            while mu > mu_min:
                e_mu = optimality_error(compute_residuals(it, evals, mu),
                                        False)
                if e_mu > opts.kappa_eps * mu:
                    break
                mu_new = update_mu_monotone(mu, opts.eps_tol, opts.kappa_mu,
                                            opts.theta_mu)
                if mu_new >= mu:
                    break
                mu = mu_new
                filt.reset()

        t0 = time.perf_counter()
        kkt0 = assemble_symmetric(it, evals)
        timings["kkt-assembly"] += time.perf_counter() - t0

        try:
            step = _compute_step(kkt0, it, evals, mu, opts, backend, state,
                                 report)
        except _LinearSolverFailure:
            report.status = "linear-solver-failure"
            break
        if step.mu_changed:
            mu = step.mu
            filt.reset()
        if step.checksum is not None:
            report.sc_checksums.append(step.checksum)
        if step.delta_w > 0.0:
            report.delta_w_count += 1
        if step.delta_c > 0.0:
            report.delta_c_count += 1

        retain = _retain_fraction(mu)
        alpha_max = _primal_alpha(it, step.direction, retain)
        alpha_z = _dual_alpha(it, step.direction, retain)

        ls = filter_line_search(it, step.direction, filt, alpha_max, mu,
                                sprob, evals, opts, theta_min, theta_max,
                                timings)
        if not ls.accepted:
            restored = _restore(sprob, it, mu, opts, timings)
            if restored is None:
                report.status = "restoration-failure"
                break
            it = restored
            filt.reset()
            evals = _timed_eval(sprob, it, timings)
            if not evals.ok:
                report.status = "restoration-failure"
                break
            alpha_last, dw_last = 0.0, step.delta_w
            completed += 1
            report.mu_history.append(mu)
            continue

        d = step.direction
        it = Iterate(ls.x, ls.s,
                     it.lam_e + ls.alpha * d.dlam_e,
                     it.lam_i + ls.alpha * d.dlam_i,
                     it.z_l + alpha_z * d.dz_l,
                     it.z_u + alpha_z * d.dz_u,
                     it.y_l + alpha_z * d.dy_l,
                     it.y_u + alpha_z * d.dy_u,
                     mu, it.x_bounds, it.s_bounds)
        assert it.interior() and it.duals_positive()
        evals = _timed_eval(sprob, it, timings)
        if not evals.ok:
            report.status = "restoration-failure"
            break
        alpha_last, dw_last = ls.alpha, step.delta_w
        completed += 1
        report.mu_history.append(mu)
    else:
        res0 = compute_residuals(it, evals, 0.0)
        e0 = optimality_error(res0, True, it, s_max=opts.s_max)
        report.log.append(_log_row(opts.max_iter, evals.f / scaling.s_f,
                                   res0, mu, alpha_last, dw_last))
        if e0 <= opts.eps_tol:
            report.status = "optimal"

    report.iterate = it
    report.iterations = completed
    report.objective = float(evals.f / scaling.s_f)
    report.e_0 = float(e0)
    return report
