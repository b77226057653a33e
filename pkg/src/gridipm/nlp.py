"""Problem abstraction for the interior-point driver.

An NLP here is

    min f(x)   s.t.  c_E(x) = 0,
                     c_lower <= c_I(x) <= c_upper,
                     x_lower <= x <= x_upper,

with two-sided bounds throughout; either side may be infinite, in which
case the corresponding barrier term and dual variable are simply absent.
The module also defines the iterate/residual containers shared by the
KKT assembly and the driver.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp


def expand_tril(h: sp.spmatrix) -> sp.csc_matrix:
    """Expand a lower-triangle symmetric storage to the full matrix."""
    h = sp.csc_matrix(h)
    upper = sp.triu(h.T, k=1)
    return (h + upper).tocsc()


class Bounds:
    """A pair of bound vectors with cached finite-side index sets."""

    def __init__(self, lower, upper):
        self.lower = np.asarray(lower, dtype=float)
        self.upper = np.asarray(upper, dtype=float)
        if self.lower.shape != self.upper.shape:
            raise ValueError("bound vectors differ in length")
        self.n = self.lower.size
        self.idx_lower = np.flatnonzero(np.isfinite(self.lower))
        self.idx_upper = np.flatnonzero(np.isfinite(self.upper))
        self.has_lower = np.isfinite(self.lower)
        self.has_upper = np.isfinite(self.upper)

    @property
    def n_finite_sides(self) -> int:
        return self.idx_lower.size + self.idx_upper.size

    def interior(self, v: np.ndarray) -> bool:
        """True if v is strictly inside every finite bound."""
        return bool(np.all(v > self.lower) and np.all(v < self.upper))


@dataclass
class NlpProblem:
    """Problem data plus the evaluation callback contract.

    The evaluator must provide:
      objective(x) -> float
      gradient(x) -> ndarray (n_x,)
      eq_constraints(x) -> ndarray (n_e,)
      ineq_constraints(x) -> ndarray (n_i,)
      eq_jacobian(x) -> sparse (n_e, n_x)
      ineq_jacobian(x) -> sparse (n_i, n_x)
      lagrangian_hessian(x, lam_e, lam_i, obj_scale) -> sparse lower
          triangle of obj_scale*∇²f + Σ λ_E∇²c_E + Σ λ_I∇²c_I

    Problems are immutable once built and the evaluator must tolerate
    concurrent read-only use.
    """

    n_x: int
    n_e: int
    n_i: int
    x_bounds: Bounds
    s_bounds: Bounds
    evaluator: object
    structure: Optional[object] = None    # BlockMap annotation, see schur
    start: Optional[np.ndarray] = None
    name: str = ""

    @classmethod
    def create(cls, n_x, n_e, n_i, x_lower, x_upper, c_lower, c_upper,
               evaluator, structure=None, start=None, name=""):
        return cls(n_x, n_e, n_i, Bounds(x_lower, x_upper),
                   Bounds(c_lower, c_upper), evaluator, structure, start, name)

    @property
    def x_lower(self) -> np.ndarray:
        return self.x_bounds.lower

    @property
    def x_upper(self) -> np.ndarray:
        return self.x_bounds.upper

    @property
    def c_lower(self) -> np.ndarray:
        return self.s_bounds.lower

    @property
    def c_upper(self) -> np.ndarray:
        return self.s_bounds.upper


class CallableEvaluator:
    """Evaluator assembled from plain callables, handy for small models."""

    def __init__(self, objective, gradient, eq=None, eq_jac=None,
                 ineq=None, ineq_jac=None, hessian=None, n_x=None):
        self._objective = objective
        self._gradient = gradient
        self._eq = eq
        self._eq_jac = eq_jac
        self._ineq = ineq
        self._ineq_jac = ineq_jac
        self._hessian = hessian
        self._n_x = n_x

    def objective(self, x):
        return float(self._objective(x))

    def gradient(self, x):
        return np.asarray(self._gradient(x), dtype=float)

    def eq_constraints(self, x):
        if self._eq is None:
            return np.zeros(0)
        return np.atleast_1d(np.asarray(self._eq(x), dtype=float))

    def ineq_constraints(self, x):
        if self._ineq is None:
            return np.zeros(0)
        return np.atleast_1d(np.asarray(self._ineq(x), dtype=float))

    def eq_jacobian(self, x):
        if self._eq_jac is None:
            return sp.csr_matrix((0, x.size))
        return sp.csr_matrix(np.atleast_2d(np.asarray(self._eq_jac(x), dtype=float)))

    def ineq_jacobian(self, x):
        if self._ineq_jac is None:
            return sp.csr_matrix((0, x.size))
        return sp.csr_matrix(np.atleast_2d(np.asarray(self._ineq_jac(x), dtype=float)))

    def lagrangian_hessian(self, x, lam_e, lam_i, obj_scale=1.0):
        if self._hessian is None:
            return sp.csc_matrix((x.size, x.size))
        # the callable returns sigma*grad2 f + sum lam*grad2 c at sigma=1;
        # linearity in the weights lets us rescale the objective part
        h = self._hessian(x, lam_e / obj_scale, lam_i / obj_scale)
        h = (h.toarray() if sp.issparse(h)
             else np.asarray(h, dtype=float)) * obj_scale
        h = 0.5 * (h + h.T)
        return sp.csc_matrix(np.tril(h))


@dataclass
class EvalResult:
    """Bundle of everything the primal-dual equations reference."""

    status: str                      # ok | non-finite | evaluation-error
    f: float = np.nan
    grad: np.ndarray = None
    c_e: np.ndarray = None
    c_i: np.ndarray = None
    j_e: sp.spmatrix = None
    j_i: sp.spmatrix = None
    h: sp.spmatrix = None            # lower triangle of the Lagrangian Hessian
    error: str = ""
    _h_full: sp.spmatrix = field(default=None, repr=False)

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    @property
    def h_full(self) -> sp.csc_matrix:
        if self._h_full is None:
            self._h_full = expand_tril(self.h)
        return self._h_full


def _all_finite(*arrays) -> bool:
    for a in arrays:
        if a is None:
            continue
        data = a.data if sp.issparse(a) else np.asarray(a)
        if data.size and not np.all(np.isfinite(data)):
            return False
    return True


def eval_all(problem: NlpProblem, x: np.ndarray,
             lam_e: np.ndarray, lam_i: np.ndarray,
             obj_scale: float = 1.0) -> EvalResult:
    """Evaluate f, gradient, constraints, Jacobians, and the Hessian.

    Exceptions raised by the evaluator map to status 'evaluation-error';
    NaN/Inf anywhere in the results map to 'non-finite'. Callers treat
    either as a rejected trial point.
    """
    ev = problem.evaluator
    try:
        f = float(ev.objective(x)) * obj_scale
        grad = np.asarray(ev.gradient(x), dtype=float) * obj_scale
        c_e = np.asarray(ev.eq_constraints(x), dtype=float)
        c_i = np.asarray(ev.ineq_constraints(x), dtype=float)
        j_e = sp.csr_matrix(ev.eq_jacobian(x))
        j_i = sp.csr_matrix(ev.ineq_jacobian(x))
        h = sp.csc_matrix(ev.lagrangian_hessian(x, lam_e, lam_i, obj_scale))
    except Exception as exc:      # noqa: BLE001 - evaluator failures are data
        return EvalResult(status="evaluation-error", error=str(exc))

    if c_e.size != problem.n_e or c_i.size != problem.n_i:
        return EvalResult(status="evaluation-error",
                          error=f"constraint sizes ({c_e.size}, {c_i.size}) do not "
                                f"match problem ({problem.n_e}, {problem.n_i})")
    if not (np.isfinite(f) and _all_finite(grad, c_e, c_i, j_e, j_i, h)):
        return EvalResult(status="non-finite", f=f, grad=grad, c_e=c_e, c_i=c_i,
                          j_e=j_e, j_i=j_i, h=h)
    return EvalResult(status="ok", f=f, grad=grad, c_e=c_e, c_i=c_i,
                      j_e=j_e, j_i=j_i, h=h)


def eval_functions(problem: NlpProblem, x: np.ndarray):
    """Cheap evaluation of (f, c_E, c_I) only, for line-search trials."""
    ev = problem.evaluator
    try:
        f = float(ev.objective(x))
        c_e = np.asarray(ev.eq_constraints(x), dtype=float)
        c_i = np.asarray(ev.ineq_constraints(x), dtype=float)
    except Exception:             # noqa: BLE001
        return None
    if not (np.isfinite(f) and np.all(np.isfinite(c_e)) and np.all(np.isfinite(c_i))):
        return None
    return f, c_e, c_i


@dataclass
class ValidationReport:
    findings: list

    @property
    def ok(self) -> bool:
        return not self.findings


def validate(problem: NlpProblem) -> ValidationReport:
    """Static and probe-based sanity checks; findings, not exceptions."""
    out = []
    if problem.n_x <= 0:
        out.append("problem has no variables")
        return ValidationReport(out)
    xb, sb = problem.x_bounds, problem.s_bounds
    if xb.n != problem.n_x:
        out.append(f"x bounds length {xb.n} does not match n_x={problem.n_x}")
    if sb.n != problem.n_i:
        out.append(f"inequality bounds length {sb.n} does not match n_i={problem.n_i}")
    for i in np.flatnonzero(xb.lower > xb.upper):
        out.append(f"inverted bound at index {i}")
    for i in np.flatnonzero(xb.lower == xb.upper):
        out.append(f"fixed variable at index {i}")
    for i in np.flatnonzero(sb.lower > sb.upper):
        out.append(f"inverted inequality bound at index {i}")
    for i in np.flatnonzero(sb.lower == sb.upper):
        out.append(f"fixed inequality range at index {i} (use an equality)")
    unbounded = ~sb.has_lower & ~sb.has_upper
    for i in np.flatnonzero(unbounded):
        out.append(f"inequality row {i} has no finite bound")
    if out:
        return ValidationReport(out)

    # probe twice near the start point to catch shape and pattern drift
    rng = np.random.default_rng(20240814)
    x0 = problem.start if problem.start is not None else np.zeros(problem.n_x)
    x0 = np.clip(x0, np.where(xb.has_lower, xb.lower + 1e-3, -1.0),
                 np.where(xb.has_upper, xb.upper - 1e-3, 1.0))
    lam_e = np.zeros(problem.n_e)
    lam_i = np.zeros(problem.n_i)
    patterns = []
    for trial in range(2):
        x = x0 + 1e-4 * rng.standard_normal(problem.n_x) * (trial + 1)
        res = eval_all(problem, x, lam_e, lam_i)
        if not res.ok:
            out.append(f"evaluation failed at probe point ({res.status}: {res.error})")
            return ValidationReport(out)
        if res.grad.size != problem.n_x:
            out.append(f"gradient length {res.grad.size} does not match n_x")
        if res.j_e.shape != (problem.n_e, problem.n_x):
            out.append(f"equality Jacobian shape {res.j_e.shape} mismatched")
        if res.j_i.shape != (problem.n_i, problem.n_x):
            out.append(f"inequality Jacobian shape {res.j_i.shape} mismatched")
        if res.h.shape != (problem.n_x, problem.n_x):
            out.append(f"Hessian shape {res.h.shape} mismatched")
        if out:
            return ValidationReport(out)
        patterns.append((_pattern(res.j_e), _pattern(res.j_i), _pattern(res.h)))
    names = ("equality Jacobian", "inequality Jacobian", "Hessian")
    for k, label in enumerate(names):
        if patterns[0][k] != patterns[1][k]:
            out.append(f"{label} sparsity pattern changed between evaluations")
    return ValidationReport(out)


def _pattern(m: sp.spmatrix):
    c = sp.coo_matrix(m)
    mask = c.data != 0.0
    return (tuple(c.row[mask]), tuple(c.col[mask]))


@dataclass
class Iterate:
    """Full primal-dual state of the interior-point iteration.

    Dual entries for infinite bound sides are identically zero. The
    bound objects are shared references to the problem's bounds.
    """

    x: np.ndarray
    s: np.ndarray
    lam_e: np.ndarray
    lam_i: np.ndarray
    z_l: np.ndarray
    z_u: np.ndarray
    y_l: np.ndarray
    y_u: np.ndarray
    mu: float
    x_bounds: Bounds
    s_bounds: Bounds

    def dist_xl(self) -> np.ndarray:
        return self.x - self.x_bounds.lower

    def dist_xu(self) -> np.ndarray:
        return self.x_bounds.upper - self.x

    def dist_sl(self) -> np.ndarray:
        return self.s - self.s_bounds.lower

    def dist_su(self) -> np.ndarray:
        return self.s_bounds.upper - self.s

    def interior(self) -> bool:
        return (self.x_bounds.interior(self.x) and self.s_bounds.interior(self.s))

    def duals_positive(self) -> bool:
        xb, sb = self.x_bounds, self.s_bounds
        return bool(np.all(self.z_l[xb.idx_lower] > 0)
                    and np.all(self.z_u[xb.idx_upper] > 0)
                    and np.all(self.y_l[sb.idx_lower] > 0)
                    and np.all(self.y_u[sb.idx_upper] > 0))

    def copy(self) -> "Iterate":
        return Iterate(self.x.copy(), self.s.copy(), self.lam_e.copy(),
                       self.lam_i.copy(), self.z_l.copy(), self.z_u.copy(),
                       self.y_l.copy(), self.y_u.copy(), self.mu,
                       self.x_bounds, self.s_bounds)


@dataclass
class Residuals:
    """The six primal-dual residual vectors.

    l_a: dual feasibility in x;  l_b: dual feasibility in s;
    l_c: equality violation;     l_d: inequality-slack consistency;
    l_e: bound complementarity for x (lower sides then upper sides,
    finite sides only);          l_f: likewise for s.
    """

    l_a: np.ndarray
    l_b: np.ndarray
    l_c: np.ndarray
    l_d: np.ndarray
    le_l: np.ndarray
    le_u: np.ndarray
    lf_l: np.ndarray
    lf_u: np.ndarray

    @property
    def l_e(self) -> np.ndarray:
        return np.concatenate([self.le_l, self.le_u])

    @property
    def l_f(self) -> np.ndarray:
        return np.concatenate([self.lf_l, self.lf_u])

    def norms_inf(self):
        def nrm(v):
            return float(np.abs(v).max()) if v.size else 0.0
        return {"l_a": nrm(self.l_a), "l_b": nrm(self.l_b), "l_c": nrm(self.l_c),
                "l_d": nrm(self.l_d), "l_e": nrm(self.l_e), "l_f": nrm(self.l_f)}
