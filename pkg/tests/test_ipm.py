"""Interior-point driver: residual algebra, step machinery, full solves."""

import math

import numpy as np
import pytest
import scipy.optimize
import scipy.sparse as sp

from gridipm import ipm
from gridipm import kkt as kktmod
from gridipm.kkt import Direction
from gridipm.nlp import (Bounds, CallableEvaluator, EvalResult, Iterate,
                         NlpProblem, eval_all)
from gridipm.schur import COUPLING, BlockMap


# ---------------------------------------------------------------------------
# builders


def quadratic(q, c, a_e=None, b_e=None, a_i=None, x_lower=None, x_upper=None,
              c_lower=None, c_upper=None, start=None, structure=None,
              name="qp"):
    """min 0.5 x'Qx + c'x with linear constraints, exact derivatives."""
    q = np.atleast_2d(np.asarray(q, dtype=float))
    c = np.atleast_1d(np.asarray(c, dtype=float))
    n = c.size
    a_e = (np.zeros((0, n)) if a_e is None
           else np.atleast_2d(np.asarray(a_e, dtype=float)))
    a_i = (np.zeros((0, n)) if a_i is None
           else np.atleast_2d(np.asarray(a_i, dtype=float)))
    b_e = (np.zeros(a_e.shape[0]) if b_e is None
           else np.atleast_1d(np.asarray(b_e, dtype=float)))
    n_e, n_i = a_e.shape[0], a_i.shape[0]

    xl = np.full(n, -np.inf) if x_lower is None else np.broadcast_to(
        np.asarray(x_lower, dtype=float), (n,)).copy()
    xu = np.full(n, np.inf) if x_upper is None else np.broadcast_to(
        np.asarray(x_upper, dtype=float), (n,)).copy()
    cl = np.full(n_i, -np.inf) if c_lower is None else np.broadcast_to(
        np.asarray(c_lower, dtype=float), (n_i,)).copy()
    cu = np.full(n_i, np.inf) if c_upper is None else np.broadcast_to(
        np.asarray(c_upper, dtype=float), (n_i,)).copy()
    ev = CallableEvaluator(
        objective=lambda x: 0.5 * x @ q @ x + c @ x,
        gradient=lambda x: q @ x + c,
        eq=(lambda x: a_e @ x - b_e) if n_e else None,
        eq_jac=(lambda x: a_e) if n_e else None,
        ineq=(lambda x: a_i @ x) if n_i else None,
        ineq_jac=(lambda x: a_i) if n_i else None,
        hessian=lambda x, le, li: np.tril(q))
    return NlpProblem(n, n_e, n_i, Bounds(xl, xu), Bounds(cl, cu), ev,
                      structure=structure, start=start, name=name)


def make_iterate(rng, n_x, n_e, n_i, mu=0.1):
    """Random interior iterate with mixed one- and two-sided bounds."""
    xl = np.full(n_x, -np.inf)
    xu = np.full(n_x, np.inf)
    for i in range(n_x):
        if i % 4 in (0, 1):
            xl[i] = -1.0 - rng.random()
        if i % 4 in (0, 2):
            xu[i] = 1.0 + rng.random()
    cl = np.full(n_i, -np.inf)
    cu = np.full(n_i, np.inf)
    for i in range(n_i):
        if i % 3 in (0, 1):
            cl[i] = -2.0 - rng.random()
        if i % 3 in (0, 2):
            cu[i] = 2.0 + rng.random()
    xb, sb = Bounds(xl, xu), Bounds(cl, cu)
    x = rng.uniform(-0.9, 0.9, n_x)
    s = rng.uniform(-1.5, 1.5, n_i)
    z_l = np.zeros(n_x)
    z_u = np.zeros(n_x)
    y_l = np.zeros(n_i)
    y_u = np.zeros(n_i)
    z_l[xb.idx_lower] = rng.uniform(0.2, 3.0, xb.idx_lower.size)
    z_u[xb.idx_upper] = rng.uniform(0.2, 3.0, xb.idx_upper.size)
    y_l[sb.idx_lower] = rng.uniform(0.2, 3.0, sb.idx_lower.size)
    y_u[sb.idx_upper] = rng.uniform(0.2, 3.0, sb.idx_upper.size)
    return Iterate(x, s, rng.standard_normal(n_e), rng.standard_normal(n_i),
                   z_l, z_u, y_l, y_u, mu, xb, sb)


def make_evals(rng, n_x, n_e, n_i, definite=False):
    a = rng.standard_normal((n_x, n_x))
    h = a @ a.T + n_x * np.eye(n_x) if definite else 0.5 * (a + a.T)
    return EvalResult(status="ok", f=float(rng.random()),
                      grad=rng.standard_normal(n_x),
                      c_e=rng.standard_normal(n_e),
                      c_i=rng.standard_normal(n_i),
                      j_e=sp.csr_matrix(rng.standard_normal((n_e, n_x))),
                      j_i=sp.csr_matrix(rng.standard_normal((n_i, n_x))),
                      h=sp.csc_matrix(np.tril(h)))


def single_bound_iterate(x=1.0, z=1.0, mu=0.1):
    """One variable, one lower bound at zero, no inequalities."""
    xb = Bounds(np.array([0.0]), np.array([np.inf]))
    sb = Bounds(np.zeros(0), np.zeros(0))
    return Iterate(np.array([float(x)]), np.zeros(0), np.zeros(0),
                   np.zeros(0), np.array([float(z)]), np.zeros(1),
                   np.zeros(0), np.zeros(0), mu, xb, sb)


def zero_direction(it):
    return Direction(np.zeros(it.x.size), np.zeros(it.s.size),
                     np.zeros(it.lam_e.size), np.zeros(it.s.size),
                     np.zeros(it.x.size), np.zeros(it.x.size),
                     np.zeros(it.s.size), np.zeros(it.s.size))


def timing_dict():
    return {k: 0.0 for k in ipm.TIMING_KEYS}


# ---------------------------------------------------------------------------
# residuals


class TestResiduals:
    def test_central_path_bound_rows_vanish(self):
        # z = mu/(x - lower) satisfies the perturbed complementarity rows
        mu = 0.37
        it = single_bound_iterate(x=0.8, z=mu / 0.8, mu=mu)
        ev = EvalResult(status="ok", f=0.0, grad=np.array([1.0]),
                        c_e=np.zeros(0), c_i=np.zeros(0),
                        j_e=sp.csr_matrix((0, 1)), j_i=sp.csr_matrix((0, 1)),
                        h=sp.csc_matrix((1, 1)))
        res = ipm.compute_residuals(it, ev, mu)
        assert res.l_e.size == 1 and res.l_e[0] == 0.0

    def test_unconstrained_minimizer_dual_row_zero(self):
        xb = Bounds(np.array([-np.inf]), np.array([np.inf]))
        sb = Bounds(np.zeros(0), np.zeros(0))
        it = Iterate(np.array([2.0]), np.zeros(0), np.zeros(0), np.zeros(0),
                     np.zeros(1), np.zeros(1), np.zeros(0), np.zeros(0),
                     0.1, xb, sb)
        ev = EvalResult(status="ok", f=0.0, grad=np.zeros(1),
                        c_e=np.zeros(0), c_i=np.zeros(0),
                        j_e=sp.csr_matrix((0, 1)), j_i=sp.csr_matrix((0, 1)),
                        h=sp.csc_matrix((1, 1)))
        res = ipm.compute_residuals(it, ev, 0.0)
        assert np.all(res.l_a == 0.0)

    def test_matches_loop_reimplementation(self):
        rng = np.random.default_rng(7)
        for _ in range(5):
            it = make_iterate(rng, 6, 2, 4)
            ev = make_evals(rng, 6, 2, 4)
            mu = float(rng.uniform(0.01, 1.0))
            res = ipm.compute_residuals(it, ev, mu)
            xb, sb = it.x_bounds, it.s_bounds
            l_a = ev.grad.copy()
            for r in range(2):
                l_a += ev.j_e.toarray()[r] * it.lam_e[r]
            for r in range(4):
                l_a += ev.j_i.toarray()[r] * it.lam_i[r]
            l_a -= it.z_l
            l_a += it.z_u
            l_b = -it.lam_i - it.y_l + it.y_u
            le_l = [it.z_l[i] * (it.x[i] - xb.lower[i]) - mu
                    for i in xb.idx_lower]
            le_u = [it.z_u[i] * (xb.upper[i] - it.x[i]) - mu
                    for i in xb.idx_upper]
            lf_l = [it.y_l[i] * (it.s[i] - sb.lower[i]) - mu
                    for i in sb.idx_lower]
            lf_u = [it.y_u[i] * (sb.upper[i] - it.s[i]) - mu
                    for i in sb.idx_upper]
            np.testing.assert_allclose(res.l_a, l_a, atol=1e-14)
            np.testing.assert_allclose(res.l_b, l_b, atol=1e-14)
            np.testing.assert_allclose(res.l_c, ev.c_e, atol=1e-14)
            np.testing.assert_allclose(res.l_d, ev.c_i - it.s, atol=1e-14)
            np.testing.assert_allclose(res.le_l, le_l, atol=1e-14)
            np.testing.assert_allclose(res.le_u, le_u, atol=1e-14)
            np.testing.assert_allclose(res.lf_l, lf_l, atol=1e-14)
            np.testing.assert_allclose(res.lf_u, lf_u, atol=1e-14)


class TestDualityMeasure:
    def test_central_point(self):
        mu = 0.05
        it = single_bound_iterate(x=2.0, z=mu / 2.0, mu=mu)
        assert ipm.duality_measure(it) == pytest.approx(mu, rel=1e-15)

    def test_hand_value(self):
        xb = Bounds(np.array([0.0, 0.0]), np.array([np.inf, np.inf]))
        sb = Bounds(np.array([0.0]), np.array([np.inf]))
        it = Iterate(np.array([1.0, 2.0]), np.array([3.0]), np.zeros(0),
                     np.zeros(1), np.array([2.0, 1.0]), np.zeros(2),
                     np.array([4.0]), np.zeros(1), 0.1, xb, sb)
        assert ipm.duality_measure(it) == pytest.approx(16.0 / 3.0)

    def test_unbounded_rejected(self):
        xb = Bounds(np.array([-np.inf]), np.array([np.inf]))
        sb = Bounds(np.zeros(0), np.zeros(0))
        it = Iterate(np.array([1.0]), np.zeros(0), np.zeros(0), np.zeros(0),
                     np.zeros(1), np.zeros(1), np.zeros(0), np.zeros(0),
                     0.1, xb, sb)
        with pytest.raises(ValueError, match="no bounded directions"):
            ipm.duality_measure(it)


class TestOptimalityError:
    def test_zero_residuals(self):
        rng = np.random.default_rng(0)
        it = make_iterate(rng, 4, 1, 2)
        res = ipm.compute_residuals(
            it, make_evals(rng, 4, 1, 2), 0.1)
        zero = kktmod.Residuals(*[np.zeros_like(v) for v in (
            res.l_a, res.l_b, res.l_c, res.l_d, res.le_l, res.le_u,
            res.lf_l, res.lf_u)])
        assert ipm.optimality_error(zero, False) == 0.0
        assert ipm.optimality_error(zero, True, it) == 0.0

    def test_small_multipliers_leave_error_unscaled(self):
        # all duals zero: both ratios floor at 1
        xb = Bounds(np.array([0.0]), np.array([np.inf]))
        sb = Bounds(np.zeros(0), np.zeros(0))
        it = Iterate(np.array([1.0]), np.zeros(0), np.zeros(0), np.zeros(0),
                     np.zeros(1), np.zeros(1), np.zeros(0), np.zeros(0),
                     0.1, xb, sb)
        res = kktmod.Residuals(np.array([3.0]), np.zeros(0), np.zeros(0),
                               np.zeros(0), np.array([0.5]), np.zeros(0),
                               np.zeros(0), np.zeros(0))
        assert ipm.optimality_error(res, True, it) == \
            ipm.optimality_error(res, False) == 3.0

    def test_large_multiplier_average(self):
        # ||lam||_1 / (n_e + 2 n_i + n_x) = 10000 -> s1 = 100
        xb = Bounds(np.array([-np.inf]), np.array([np.inf]))
        sb = Bounds(np.zeros(0), np.zeros(0))
        it = Iterate(np.array([0.0]), np.zeros(0), np.array([20000.0]),
                     np.zeros(0), np.zeros(1), np.zeros(1), np.zeros(0),
                     np.zeros(0), 0.1, xb, sb)
        res = kktmod.Residuals(np.array([1.0]), np.zeros(0), np.zeros(1),
                               np.zeros(0), np.zeros(0), np.zeros(0),
                               np.zeros(0), np.zeros(0))
        assert ipm.optimality_error(res, True, it, s_max=100.0) == \
            pytest.approx(0.01)
        assert ipm.optimality_error(res, False) == 1.0

    def test_scaled_needs_multipliers(self):
        res = kktmod.Residuals(*[np.zeros(0)] * 8)
        with pytest.raises(ValueError):
            ipm.optimality_error(res, True)


class TestFractionToBoundary:
    def test_single_lower(self):
        a = ipm.fraction_to_boundary(np.array([1.0]), np.array([-1.0]),
                                     np.array([0.0]), np.array([np.inf]),
                                     0.01)
        assert a == pytest.approx(0.99, abs=1e-15)

    def test_componentwise_minimum(self):
        a = ipm.fraction_to_boundary(np.array([1.0, 4.0]),
                                     np.array([-2.0, -8.0]),
                                     np.zeros(2), np.full(2, np.inf), 0.05)
        assert a == pytest.approx(0.475, abs=1e-15)

    def test_receding_direction_full_step(self):
        a = ipm.fraction_to_boundary(np.array([1.0, 2.0]),
                                     np.array([0.5, 0.0]),
                                     np.zeros(2), np.full(2, np.inf), 0.01)
        assert a == 1.0

    def test_retained_distance_property(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            n = rng.integers(1, 8)
            lo = np.where(rng.random(n) < 0.7, -rng.random(n) - 0.5, -np.inf)
            up = np.where(rng.random(n) < 0.7, rng.random(n) + 0.5, np.inf)
            v = rng.uniform(-0.4, 0.4, n)
            dv = rng.standard_normal(n)
            tau = float(rng.uniform(0.005, 0.2))
            a = ipm.fraction_to_boundary(v, dv, lo, up, tau)
            assert 0.0 < a <= 1.0
            t = v + a * dv
            fin = np.isfinite(lo)
            assert np.all(t[fin] - lo[fin] >= tau * (v - lo)[fin] * (1 - 1e-12))
            fin = np.isfinite(up)
            assert np.all(up[fin] - t[fin] >= tau * (up - v)[fin] * (1 - 1e-12))


class TestThetaPhi:
    def _it(self, x, s, xb, sb):
        return Iterate(np.atleast_1d(np.asarray(x, dtype=float)),
                       np.atleast_1d(np.asarray(s, dtype=float)),
                       np.zeros(0), np.zeros(np.atleast_1d(s).size),
                       np.zeros(np.atleast_1d(x).size),
                       np.zeros(np.atleast_1d(x).size),
                       np.zeros(np.atleast_1d(s).size),
                       np.zeros(np.atleast_1d(s).size), 0.1, xb, sb)

    def test_theta_hand_value(self):
        xb = Bounds(np.array([-np.inf]), np.array([np.inf]))
        sb = Bounds(np.array([-np.inf]), np.array([np.inf]))
        it = self._it([0.0], [0.5], xb, sb)
        ev = EvalResult(status="ok", f=0.0, grad=np.zeros(1),
                        c_e=np.array([0.5]), c_i=np.array([0.25]),
                        j_e=sp.csr_matrix((1, 1)), j_i=sp.csr_matrix((1, 1)),
                        h=sp.csc_matrix((1, 1)))
        assert ipm.theta(it, ev) == pytest.approx(0.75)

    def test_theta_feasible_zero(self):
        xb = Bounds(np.array([-np.inf]), np.array([np.inf]))
        sb = Bounds(np.array([-np.inf]), np.array([np.inf]))
        it = self._it([0.0], [0.25], xb, sb)
        ev = EvalResult(status="ok", f=0.0, grad=np.zeros(1),
                        c_e=np.zeros(0), c_i=np.array([0.25]),
                        j_e=sp.csr_matrix((0, 1)), j_i=sp.csr_matrix((1, 1)),
                        h=sp.csc_matrix((1, 1)))
        assert ipm.theta(it, ev) == 0.0

    def test_phi_single_distance_e(self):
        xb = Bounds(np.array([0.0]), np.array([np.inf]))
        sb = Bounds(np.zeros(0), np.zeros(0))
        it = self._it([math.e], np.zeros(0), xb, sb)
        ev = EvalResult(status="ok", f=0.0, grad=np.zeros(1),
                        c_e=np.zeros(0), c_i=np.zeros(0),
                        j_e=sp.csr_matrix((0, 1)), j_i=sp.csr_matrix((0, 1)),
                        h=sp.csc_matrix((1, 1)))
        assert ipm.phi(it, ev, 1.0) == pytest.approx(-1.0, abs=1e-14)

    def test_phi_boundary_rejected(self):
        xb = Bounds(np.array([0.0]), np.array([np.inf]))
        sb = Bounds(np.zeros(0), np.zeros(0))
        it = self._it([0.0], np.zeros(0), xb, sb)
        ev = EvalResult(status="ok", f=1.0, grad=np.zeros(1),
                        c_e=np.zeros(0), c_i=np.zeros(0),
                        j_e=sp.csr_matrix((0, 1)), j_i=sp.csr_matrix((0, 1)),
                        h=sp.csc_matrix((1, 1)))
        with pytest.raises(ValueError, match="barrier undefined"):
            ipm.phi(it, ev, 1.0)


# ---------------------------------------------------------------------------
# filter and line search


class TestFilter:
    def test_domination(self):
        f = ipm.Filter()
        f.add(1.0, 2.0)
        assert f.dominates(1.5, 2.5)
        assert not f.dominates(0.5, 2.5)
        assert not f.dominates(1.5, 1.5)

    def test_antichain_after_augmentation(self):
        rng = np.random.default_rng(3)
        f = ipm.Filter()
        for _ in range(200):
            f.add(float(rng.random()), float(rng.random()))
            for i, (t1, p1) in enumerate(f.entries):
                for j, (t2, p2) in enumerate(f.entries):
                    if i != j:
                        assert not (t1 >= t2 and p1 >= p2)

    def test_reset(self):
        f = ipm.Filter()
        f.add(1.0, 1.0)
        f.reset()
        assert len(f) == 0


class TestFilterLineSearch:
    def _setup_qp(self):
        q = np.diag([2.0, 4.0])
        problem = quadratic(q, [0.0, 0.0], start=[1.0, 1.0])
        it = ipm.initialize_iterate(problem, ipm.IpmOptions())
        evals = eval_all(problem, it.x, it.lam_e, it.lam_i)
        return problem, it, evals, q

    def test_newton_step_first_trial(self):
        problem, it, evals, q = self._setup_qp()
        d = zero_direction(it)
        d.dx[:] = -np.linalg.solve(q, evals.grad)
        ls = ipm.filter_line_search(it, d, ipm.Filter(), 1.0, 0.1, problem,
                                    evals, ipm.IpmOptions(), 1e-4, 1e4)
        assert ls.accepted and ls.alpha == 1.0
        assert ls.f == pytest.approx(0.0, abs=1e-14)
        assert ls.f_type

    def test_dominated_trials_signal_restoration(self):
        problem, it, evals, q = self._setup_qp()
        d = zero_direction(it)
        d.dx[:] = -np.linalg.solve(q, evals.grad)
        filt = ipm.Filter()
        filt.add(0.0, -np.inf)          # dominates every trial pair
        calls = {"n": 0}
        inner = problem.evaluator._objective

        def counting(x):
            calls["n"] += 1
            return inner(x)

        problem.evaluator._objective = counting
        ls = ipm.filter_line_search(it, d, filt, 1.0, 0.1, problem, evals,
                                    ipm.IpmOptions(), 1e-4, 1e4)
        assert not ls.accepted
        assert calls["n"] == 60

    def test_theta_progress_acceptance_augments_filter(self):
        # infeasible equality start: acceptance is theta-driven, not Armijo
        problem = quadratic(np.eye(2), [0.0, 0.0], a_e=[[1.0, 1.0]],
                            b_e=[1.0], start=[0.0, 0.0])
        it = ipm.initialize_iterate(problem, ipm.IpmOptions())
        evals = eval_all(problem, it.x, it.lam_e, it.lam_i)
        d = zero_direction(it)
        d.dx[:] = [0.5, 0.5]            # restores feasibility fully
        filt = ipm.Filter()
        ls = ipm.filter_line_search(it, d, filt, 1.0, 0.1, problem, evals,
                                    ipm.IpmOptions(), 1e-4, 1e4)
        assert ls.accepted and not ls.f_type
        assert len(filt) == 1


# ---------------------------------------------------------------------------
# regularization


class TestCurvatureTest:
    def test_identity_always_passes(self):
        d = Direction(np.array([1.0, -2.0]), np.zeros(0), np.zeros(0),
                      np.zeros(0), np.zeros(2), np.zeros(2), np.zeros(0),
                      np.zeros(0))
        assert ipm.curvature_test(d, (sp.eye(2), np.zeros(0)), 0.0, 0.5)

    def test_zero_matrix_fails(self):
        d = Direction(np.array([1.0, 1.0]), np.zeros(0), np.zeros(0),
                      np.zeros(0), np.zeros(2), np.zeros(2), np.zeros(0),
                      np.zeros(0))
        assert not ipm.curvature_test(d, (sp.csr_matrix((2, 2)), np.zeros(0)),
                                      0.0, 0.5)

    def test_indefinite_hand_value(self):
        d = Direction(np.array([1.0, 1.0]), np.zeros(0), np.zeros(0),
                      np.zeros(0), np.zeros(2), np.zeros(2), np.zeros(0),
                      np.zeros(0))
        w = sp.diags([1.0, -3.0])
        # d'Wd = -2 < 0.1 * 2
        assert not ipm.curvature_test(d, (w, np.zeros(0)), 0.0, 0.1)
        # a shift past (2 + 0.2)/2 flips the verdict
        assert ipm.curvature_test(d, (w, np.zeros(0)), 1.2, 0.1)


def dense_inertia(m, tol=1e-11):
    vals = np.linalg.eigvalsh(np.asarray(m.todense(), dtype=float))
    scale = max(1.0, float(np.abs(vals).max()))
    return (int((vals > tol * scale).sum()), int((vals < -tol * scale).sum()),
            int((np.abs(vals) <= tol * scale).sum()))


class TestInertiaCorrection:
    def _backend(self):
        return ipm.DirectBackend(ipm.IpmOptions(), timing_dict())

    def test_convex_qp_unshifted(self):
        rng = np.random.default_rng(1)
        it = make_iterate(rng, 4, 2, 0)
        ev = make_evals(rng, 4, 2, 0, definite=True)
        kkt = kktmod.assemble_symmetric(it, ev)
        corr = ipm.inertia_correction(kkt, self._backend(), 0.1)
        assert corr.delta_w == 0.0 and corr.delta_c == 0.0
        assert corr.trials == 1
        assert tuple(corr.handle.inertia) == (4, 2, 0)
        assert dense_inertia(corr.handle.reduced.matrix) == (4, 2, 0)

    def test_negative_hessian_needs_large_shift(self):
        xb = Bounds(np.array([-np.inf]), np.array([np.inf]))
        sb = Bounds(np.zeros(0), np.zeros(0))
        it = Iterate(np.zeros(1), np.zeros(0), np.zeros(0), np.zeros(0),
                     np.zeros(1), np.zeros(1), np.zeros(0), np.zeros(0),
                     0.1, xb, sb)
        ev = EvalResult(status="ok", f=0.0, grad=np.ones(1),
                        c_e=np.zeros(0), c_i=np.zeros(0),
                        j_e=sp.csr_matrix((0, 1)), j_i=sp.csr_matrix((0, 1)),
                        h=sp.csc_matrix(np.array([[-1.0]])))
        kkt = kktmod.assemble_symmetric(it, ev)
        corr = ipm.inertia_correction(kkt, self._backend(), 0.1)
        assert corr.delta_w > 1.0
        assert -1.0 + corr.delta_w > 0.0
        assert tuple(corr.handle.inertia) == (1, 0, 0)

    def test_duplicated_equality_row(self):
        rng = np.random.default_rng(2)
        it = make_iterate(rng, 3, 2, 0)
        ev = make_evals(rng, 3, 2, 0, definite=True)
        row = rng.standard_normal(3)
        ev.j_e = sp.csr_matrix(np.vstack([row, row]))
        kkt = kktmod.assemble_symmetric(it, ev)
        assert dense_inertia(kkt.with_shifts(0.0, 0.0).matrix
                             if hasattr(kkt, "matrix") else
                             kktmod.reduce_slacks(kkt).matrix)[2] > 0
        corr = ipm.inertia_correction(kkt, self._backend(), 0.1)
        assert corr.delta_c > 0.0
        assert tuple(corr.handle.inertia) == (3, 2, 0)

    def test_matches_eigenvalue_oracle(self):
        rng = np.random.default_rng(5)
        backend = self._backend()
        for _ in range(10):
            n_x = int(rng.integers(2, 7))
            n_e = int(rng.integers(0, 3))
            n_i = int(rng.integers(0, 4))
            it = make_iterate(rng, n_x, n_e, n_i)
            ev = make_evals(rng, n_x, n_e, n_i)
            kkt = kktmod.assemble_symmetric(it, ev)
            corr = ipm.inertia_correction(kkt, backend, 0.1)
            n_k = corr.handle.reduced.kept.size
            assert tuple(corr.handle.inertia) == (n_x + n_k, n_e + n_i, 0)
            assert dense_inertia(corr.handle.reduced.matrix) == \
                tuple(corr.handle.inertia)

    def test_cap_exhaustion_raises(self):
        class AlwaysWrong:
            def factorize(self, kkt):
                class H:
                    inertia = (0, 1, 0)
                    target = (1, 0, 0)
                return H()

        rng = np.random.default_rng(0)
        it = make_iterate(rng, 1, 0, 0)
        ev = make_evals(rng, 1, 0, 0)
        kkt = kktmod.assemble_symmetric(it, ev)
        with pytest.raises(ipm._LinearSolverFailure):
            ipm.inertia_correction(kkt, AlwaysWrong(), 0.1)

    def test_second_use_warm_starts_from_last_delta(self):
        # after a successful shift, the next search starts at a third of it
        state = ipm._RegState(delta_w_last=0.9)
        sched = ipm._DeltaSchedule(state)
        sched.bump()
        assert sched.value == pytest.approx(0.3)
        sched.bump()
        assert sched.value == pytest.approx(2.4)


# ---------------------------------------------------------------------------
# barrier updates


class TestMonotoneUpdate:
    def test_linear_regime(self):
        assert ipm.update_mu_monotone(1.0, 1e-8) == pytest.approx(0.2)

    def test_superlinear_regime(self):
        assert ipm.update_mu_monotone(0.01, 1e-8) == pytest.approx(0.001)

    def test_floor(self):
        assert ipm.update_mu_monotone(1e-9, 1e-8) == pytest.approx(1e-9)


class TestMehrotraUpdate:
    def test_stalled_predictor_keeps_tau(self):
        it = single_bound_iterate(x=1.0, z=1.0)
        assert ipm.update_mu_mehrotra(it, zero_direction(it)) == \
            pytest.approx(1.0)

    def test_half_progress(self):
        it = single_bound_iterate(x=1.0, z=1.0)
        d = zero_direction(it)
        d.dz_l[:] = -0.5
        assert ipm.update_mu_mehrotra(it, d) == pytest.approx(0.125)

    def test_full_progress_clamps_to_floor(self):
        it = single_bound_iterate(x=1.0, z=1.0)
        d = zero_direction(it)
        d.dz_l[:] = -1.0
        assert ipm.update_mu_mehrotra(it, d, mu_min=1e-7) == \
            pytest.approx(1e-7)


class TestQualityUpdate:
    def _factory_product(self, it, product_of_sigma):
        """Directions whose full-step trial product equals the callable."""
        def factory(sigma):
            d = zero_direction(it)
            d.dz_l[:] = product_of_sigma(sigma) - it.z_l[0]
            return d
        return factory

    def test_increasing_q_returns_left_end(self):
        it = single_bound_iterate(x=1.0, z=1.0)
        fac = self._factory_product(it, lambda s: s)
        res = ipm.update_mu_quality(it, fac, 1e-3, 10.0)
        assert res.sections == 12
        # one golden-section resolution of the interval
        resolution = (10.0 - 1e-3) * ((math.sqrt(5) - 1) / 2) ** 12
        assert res.sigma <= 1e-3 + resolution
        assert res.mu == pytest.approx(res.sigma * 1.0)

    def test_constant_q_stays_in_interval(self):
        it = single_bound_iterate(x=1.0, z=1.0)
        res = ipm.update_mu_quality(it, lambda s: zero_direction(it),
                                    1e-3, 10.0)
        assert 1e-3 <= res.sigma <= 10.0
        assert res.sections == 12

    def test_unimodal_q_against_scalar_minimizer(self):
        it = single_bound_iterate(x=1.0, z=1.0)
        prod = lambda s: (s - 2.0) ** 2 + 0.5      # noqa: E731
        fac = self._factory_product(it, prod)
        res = ipm.update_mu_quality(it, fac, 1e-3, 10.0)
        oracle = scipy.optimize.minimize_scalar(
            prod, bounds=(1e-3, 10.0), method="bounded")
        resolution = (10.0 - 1e-3) * ((math.sqrt(5) - 1) / 2) ** 12
        assert abs(res.sigma - oracle.x) <= 2 * resolution

    def test_mu_floor_applies(self):
        it = single_bound_iterate(x=1.0, z=1.0)
        fac = self._factory_product(it, lambda s: s)
        res = ipm.update_mu_quality(it, fac, 1e-3, 10.0, mu_min=0.5)
        assert res.mu == 0.5


# ---------------------------------------------------------------------------
# scaling and initialization


class TestScaling:
    def test_objective_factor_small_gradient(self):
        problem = quadratic([[0.0]], [10.0])
        sc = ipm.compute_scaling(problem, np.zeros(1), 100.0)
        assert sc.s_f == 1.0

    def test_objective_factor_large_gradient(self):
        problem = quadratic([[0.0]], [1000.0])
        sc = ipm.compute_scaling(problem, np.zeros(1), 100.0)
        assert sc.s_f == pytest.approx(0.1)

    def test_zero_row_guard(self):
        problem = quadratic(np.zeros((2, 2)), [1.0, 1.0],
                            a_e=[[0.0, 0.0], [0.0, 500.0]], b_e=[0.0, 1.0])
        sc = ipm.compute_scaling(problem, np.zeros(2), 100.0)
        assert sc.s_g[0] == 1.0
        assert sc.s_g[1] == pytest.approx(0.2)

    def test_scaled_problem_consistency(self):
        problem = quadratic(np.eye(2), [0.0, 0.0], a_i=[[200.0, 0.0]],
                            c_lower=[-4.0], c_upper=[4.0])
        sc = ipm.compute_scaling(problem, np.zeros(2), 100.0)
        scaled = ipm.apply_scaling(problem, sc)
        x = np.array([0.5, -0.5])
        np.testing.assert_allclose(scaled.evaluator.ineq_constraints(x),
                                   sc.s_h * problem.evaluator.ineq_constraints(x))
        np.testing.assert_allclose(scaled.c_lower, sc.s_h * problem.c_lower)
        np.testing.assert_allclose(scaled.c_upper, sc.s_h * problem.c_upper)


class TestInitializeIterate:
    def test_start_on_bound_projected_inside(self):
        problem = quadratic([[2.0]], [0.0], x_lower=[1.0], start=[1.0])
        it = ipm.initialize_iterate(problem, ipm.IpmOptions())
        assert it.x[0] > 1.0
        assert it.interior() and it.duals_positive()

    def test_mid_box_unchanged(self):
        problem = quadratic([[2.0]], [0.0], x_lower=[0.0], x_upper=[10.0],
                            start=[5.0])
        it = ipm.initialize_iterate(problem, ipm.IpmOptions())
        assert it.x[0] == 5.0

    def test_centered_dual_value(self):
        problem = quadratic([[2.0]], [0.0], x_lower=[0.0], start=[0.5])
        it = ipm.initialize_iterate(problem, ipm.IpmOptions(mu_0=0.1))
        assert it.z_l[0] == pytest.approx(0.2)

    def test_slack_projected_from_constraint_value(self):
        problem = quadratic(np.eye(2), [0.0, 0.0], a_i=[[1.0, 1.0]],
                            c_lower=[0.0], c_upper=[1.0], start=[4.0, 4.0])
        it = ipm.initialize_iterate(problem, ipm.IpmOptions())
        assert 0.0 < it.s[0] < 1.0


# ---------------------------------------------------------------------------
# direction solve consistency


class TestDirectionConsistency:
    def test_recovered_direction_satisfies_full_system(self):
        rng = np.random.default_rng(17)
        for seed in range(5):
            it = make_iterate(rng, 5, 2, 3)
            ev = make_evals(rng, 5, 2, 3, definite=True)
            kkt = kktmod.assemble_symmetric(it, ev)
            backend = ipm.DirectBackend(ipm.IpmOptions(), timing_dict())
            handle = backend.factorize(kkt)
            solver = ipm._direction_solver(handle, kkt)
            res = ipm.compute_residuals(it, ev, 0.05)
            d = solver(res)
            unsym = kktmod.build_unsymmetric(kkt)
            lhs = unsym.matrix @ unsym.pack(d)
            rhs = unsym.rhs(res)
            scale = max(1.0, float(np.abs(rhs).max()))
            err = np.abs(lhs - rhs) / scale
            assert float(err.max()) <= 1e-10
            # the bound-complementarity rows specifically
            head = 5 + 3 + 2 + 3
            assert float(err[head:].max()) <= 1e-10

    def test_residual_linearity_in_mu(self):
        rng = np.random.default_rng(23)
        it = make_iterate(rng, 4, 1, 2)
        ev = make_evals(rng, 4, 1, 2)
        r0 = ipm.compute_residuals(it, ev, 0.0)
        r1 = ipm.compute_residuals(it, ev, 0.7)
        unit = ipm._unit_residuals(it)
        for name in ("l_a", "l_b", "l_c", "l_d", "le_l", "le_u",
                     "lf_l", "lf_u"):
            np.testing.assert_allclose(
                getattr(r1, name),
                getattr(r0, name) + 0.7 * getattr(unit, name), atol=1e-14)


# ---------------------------------------------------------------------------
# full solves


def barrier_qp():
    """min x^2 with x >= 1; analytic optimum x=1, z=2, objective 1."""
    return quadratic([[2.0]], [0.0], x_lower=[1.0], start=[2.0])


def box_qp(structure=None):
    """min (x-2)^2 + (y-1)^2 s.t. x + y <= 2, box [0,3]^2; optimum at
    (1.5, 0.5) with objective 0.5."""
    return quadratic(2.0 * np.eye(2), [-4.0, -2.0], a_i=[[1.0, 1.0]],
                     c_upper=[2.0], x_lower=[0.0, 0.0], x_upper=[3.0, 3.0],
                     start=[0.5, 0.5], structure=structure)


class TestSolveBasics:
    def test_bound_qp_analytic(self):
        report = ipm.solve(barrier_qp())
        assert report.status == "optimal" and report.success
        # objective check ignores the constant term: f(x)=x^2 here
        assert report.iterate.x[0] == pytest.approx(1.0, abs=1e-6)
        assert report.objective == pytest.approx(1.0, rel=1e-6)
        assert report.iterate.z_l[0] > 0.0
        assert report.e_0 <= 1e-6

    def test_degenerate_lp(self):
        problem = quadratic(np.zeros((2, 2)), [1.0, 1.0], a_e=[[1.0, 1.0]],
                            b_e=[1.0], x_lower=[0.0, 0.0],
                            start=[0.3, 0.3])
        report = ipm.solve(problem)
        assert report.success
        assert report.objective == pytest.approx(1.0, abs=1e-6)

    @pytest.mark.parametrize("strategy", ["monotone", "mehrotra", "quality"])
    def test_box_qp_all_strategies(self, strategy):
        report = ipm.solve(box_qp(), ipm.IpmOptions(mu_strategy=strategy))
        assert report.success
        np.testing.assert_allclose(report.iterate.x, [1.5, 0.5], atol=1e-5)
        assert report.objective == pytest.approx(-4.5, rel=1e-6)
        if strategy == "quality":
            assert report.quality_stats
            for row in report.quality_stats:
                assert row["sections"] <= 12
                assert 1e-3 <= row["sigma"] <= 10.0

    def test_box_qp_against_scipy(self):
        problem = box_qp()
        report = ipm.solve(problem, ipm.IpmOptions(eps_tol=1e-9))
        ref = scipy.optimize.minimize(
            lambda x: x @ x - 4.0 * x[0] - 2.0 * x[1],
            [0.5, 0.5], bounds=[(0, 3), (0, 3)],
            constraints=[{"type": "ineq", "fun": lambda x: 2.0 - x[0] - x[1]}])
        assert ref.success
        assert report.objective == pytest.approx(ref.fun, abs=1e-7)

    def test_equality_qp_no_bounds(self):
        # no bounded directions at all: adaptive mu guard path
        q = np.diag([2.0, 4.0, 6.0])
        a = np.array([[1.0, 1.0, 1.0]])
        problem = quadratic(q, [-1.0, 0.0, 1.0], a_e=a, b_e=[3.0],
                            start=[0.0, 0.0, 0.0])
        kkt = np.block([[q, a.T], [a, np.zeros((1, 1))]])
        sol = np.linalg.solve(kkt, np.concatenate([[1.0, 0.0, -1.0], [3.0]]))
        f_star = 0.5 * sol[:3] @ q @ sol[:3] + np.array([-1.0, 0.0, 1.0]) @ sol[:3]
        for strategy in ("monotone", "mehrotra"):
            report = ipm.solve(problem, ipm.IpmOptions(mu_strategy=strategy))
            assert report.success
            assert report.objective == pytest.approx(f_star, rel=1e-8)

    def test_strictly_convex_qp_never_regularizes(self):
        rng = np.random.default_rng(29)
        m = rng.standard_normal((4, 4))
        q = m @ m.T + 4.0 * np.eye(4)
        a_e = rng.standard_normal((2, 4))
        problem = quadratic(q, rng.standard_normal(4), a_e=a_e,
                            b_e=rng.standard_normal(2),
                            x_lower=np.full(4, -10.0),
                            x_upper=np.full(4, 10.0), start=np.zeros(4))
        report = ipm.solve(problem, ipm.IpmOptions(eps_tol=1e-8))
        assert report.success
        assert report.e_0 <= 1e-8
        assert report.iterations <= 30
        assert report.delta_w_count == 0

    @pytest.mark.parametrize("mode", ["inertia", "curvature"])
    def test_nonconvex_box_needs_regularization(self, mode):
        problem = quadratic(-2.0 * np.eye(2), [0.0, 0.0],
                            x_lower=[-1.0, -1.0], x_upper=[2.0, 2.0],
                            start=[0.5, 0.6])
        report = ipm.solve(problem, ipm.IpmOptions(inertia_mode=mode))
        assert report.success
        assert report.objective == pytest.approx(-8.0, rel=1e-5)
        np.testing.assert_allclose(report.iterate.x, [2.0, 2.0], atol=1e-4)
        assert report.delta_w_count > 0

    def test_scaling_recovers_original_objective(self):
        # badly scaled clone of the bound QP: objective x 1e4
        problem = quadratic([[2.0e4]], [0.0], x_lower=[1.0], start=[2.0])
        report = ipm.solve(problem, ipm.IpmOptions())
        assert report.success
        assert report.scaling.s_f < 1.0
        assert report.objective == pytest.approx(1.0e4, rel=1e-6)


class TestSolveReporting:
    def test_log_rows_match_iterations(self):
        for opts in (ipm.IpmOptions(),
                     ipm.IpmOptions(mu_strategy="mehrotra"),
                     ipm.IpmOptions(max_iter=2)):
            report = ipm.solve(box_qp(), opts)
            assert len(report.log) == report.iterations + 1
            for row in report.log:
                assert set(row) == {"iter", "objective", "inf_pr", "inf_du",
                                    "mu", "alpha", "delta_w"}

    def test_max_iter_status(self):
        report = ipm.solve(box_qp(), ipm.IpmOptions(max_iter=2))
        assert report.status == "max-iter"
        assert not report.success
        assert report.iterations == 2

    def test_monotone_mu_non_increasing_to_floor(self):
        opts = ipm.IpmOptions(eps_tol=1e-9)
        report = ipm.solve(box_qp(), opts)
        hist = np.asarray(report.mu_history)
        assert np.all(np.diff(hist) <= 0.0)
        distinct = hist[np.concatenate([[True], np.diff(hist) != 0.0])]
        assert np.all(np.diff(distinct) < 0.0)
        assert hist.min() >= opts.eps_tol / 10.0 * (1.0 - 1e-12)

    def test_final_iterate_interior(self):
        report = ipm.solve(box_qp())
        assert report.iterate.interior()
        assert report.iterate.duals_positive()

    def test_timing_keys_complete(self):
        report = ipm.solve(box_qp())
        assert set(report.timings) == set(ipm.TIMING_KEYS)
        assert report.timings["function-eval"] > 0.0


class TestOptionsValidation:
    @pytest.mark.parametrize("kwargs", [
        {"kappa_mu": 0.0}, {"kappa_mu": 1.0}, {"theta_mu": 1.0},
        {"theta_mu": 2.5}, {"eps_tol": 0.0}, {"mu_strategy": "fixed"},
        {"inertia_mode": "none"}, {"linear_solver": "pardiso"},
        {"sc_mode": "dense"}, {"sigma_min": 2.0, "sigma_max": 1.0},
    ])
    def test_rejected(self, kwargs):
        with pytest.raises(ValueError):
            ipm.IpmOptions(**kwargs)

    def test_schur_requires_structure(self):
        with pytest.raises(ValueError, match="BlockMap"):
            ipm.solve(box_qp(), ipm.IpmOptions(linear_solver="schur"))


# ---------------------------------------------------------------------------
# structured backends end to end


def two_block_qp(structure=True):
    """Two 2-variable blocks tied by one coupling variable."""
    n = 5
    q = np.diag([2.0, 2.5, 3.0, 3.5, 4.0])
    q[0, 4] = q[4, 0] = 0.5
    q[2, 4] = q[4, 2] = -0.4
    a_e = np.array([
        [1.0, 1.0, 0.0, 0.0, 0.5],
        [0.0, 0.0, 1.0, -1.0, 0.5],
    ])
    a_i = np.array([
        [1.0, -1.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, 1.0, 1.0],
    ])
    bm = BlockMap(x_labels=[0, 0, 1, 1, COUPLING], eq_labels=[0, 1],
                  ineq_labels=[0, 1], n_blocks=2) if structure else None
    return quadratic(q, [1.0, -1.0, 0.5, 0.0, -0.5], a_e=a_e, b_e=[1.0, 0.5],
                     a_i=a_i, c_lower=[-2.0, -3.0], c_upper=[2.0, 3.0],
                     x_lower=np.full(n, -5.0), x_upper=np.full(n, 5.0),
                     start=np.zeros(n), structure=bm)


def period_qp(n_periods=3):
    """Replicated period blocks coupled by cumulative-sum rows.

    Each period owns (p_n, w_n) with one local inequality
    p_n + w_n <= 2; the coupling rows are the running sums
    sum_{m<=n} p_m in [-5, 5], whose multipliers couple every earlier
    period while the row's slack lives in period n alone.
    """
    n = 2 * n_periods
    q = 2.0 * np.eye(n)
    c = np.tile([-2.0, -1.0], n_periods)
    a_i = np.zeros((2 * n_periods, n))
    ineq_labels = np.empty(2 * n_periods, dtype=int)
    slack_labels = np.empty(2 * n_periods, dtype=int)
    keep = np.zeros(2 * n_periods, dtype=bool)
    groups = np.full(2 * n_periods, -1)
    c_lo = np.empty(2 * n_periods)
    c_hi = np.empty(2 * n_periods)
    for k in range(n_periods):
        a_i[k, 2 * k] = 1.0
        a_i[k, 2 * k + 1] = 1.0
        ineq_labels[k] = k
        slack_labels[k] = k
        groups[k] = 0
        c_lo[k], c_hi[k] = -np.inf, 2.0
    for k in range(n_periods):
        r = n_periods + k
        a_i[r, 0:2 * (k + 1):2] = 1.0      # sum of p_1..p_k
        ineq_labels[r] = COUPLING
        slack_labels[r] = k
        keep[r] = True
        c_lo[r], c_hi[r] = -5.0, 5.0
    bm = BlockMap(x_labels=np.repeat(np.arange(n_periods), 2),
                  eq_labels=np.zeros(0, dtype=int),
                  ineq_labels=ineq_labels, n_blocks=n_periods,
                  keep_slacks=keep, slack_groups=groups,
                  slack_labels=slack_labels)
    return quadratic(q, c, a_i=a_i, c_lower=c_lo, c_upper=c_hi,
                     x_lower=np.full(n, -3.0), x_upper=np.full(n, 3.0),
                     start=np.zeros(n), structure=bm)


class TestStructuredSolves:
    def test_direct_and_schur_agree(self):
        rep_d = ipm.solve(two_block_qp(), ipm.IpmOptions(eps_tol=1e-9))
        rep_s = ipm.solve(two_block_qp(), ipm.IpmOptions(
            eps_tol=1e-9, linear_solver="schur"))
        assert rep_d.success and rep_s.success
        assert rep_s.objective == pytest.approx(rep_d.objective, rel=1e-9)
        np.testing.assert_allclose(rep_s.iterate.x, rep_d.iterate.x,
                                   atol=1e-8)
        assert rep_s.sc_checksums
        assert rep_s.timings["sc-assembly"] > 0.0
        assert rep_s.timings["sc-solve"] > 0.0

    def test_worker_count_bitwise_stable(self):
        rep_1 = ipm.solve(two_block_qp(), ipm.IpmOptions(
            linear_solver="schur", workers=1))
        rep_2 = ipm.solve(two_block_qp(), ipm.IpmOptions(
            linear_solver="schur", workers=2))
        assert np.array_equal(rep_1.iterate.x, rep_2.iterate.x)
        assert rep_1.sc_checksums == rep_2.sc_checksums

    def test_sc_modes_agree(self):
        rep_b = ipm.solve(two_block_qp(), ipm.IpmOptions(
            linear_solver="schur", sc_mode="backsolve"))
        rep_a = ipm.solve(two_block_qp(), ipm.IpmOptions(
            linear_solver="schur", sc_mode="augmented"))
        assert rep_b.success and rep_a.success
        assert rep_a.objective == pytest.approx(rep_b.objective, rel=1e-10)

    def test_period_replicated_backend(self):
        problem = period_qp(3)
        rep_d = ipm.solve(period_qp(3), ipm.IpmOptions(eps_tol=1e-9))
        rep_p = ipm.solve(problem, ipm.IpmOptions(
            eps_tol=1e-9, linear_solver="schur-structured"))
        assert rep_d.success and rep_p.success
        assert rep_p.objective == pytest.approx(rep_d.objective, rel=1e-9)
        np.testing.assert_allclose(rep_p.iterate.x, rep_d.iterate.x,
                                   atol=1e-8)
        assert rep_p.sc_checksums

    def test_period_backend_matches_generic_schur(self):
        rep_s = ipm.solve(period_qp(4), ipm.IpmOptions(
            eps_tol=1e-9, linear_solver="schur"))
        rep_p = ipm.solve(period_qp(4), ipm.IpmOptions(
            eps_tol=1e-9, linear_solver="schur-structured"))
        assert rep_s.success and rep_p.success
        assert rep_p.objective == pytest.approx(rep_s.objective, rel=1e-9)

    def test_period_qp_against_scipy(self):
        problem = period_qp(3)
        report = ipm.solve(problem, ipm.IpmOptions(
            eps_tol=1e-9, linear_solver="schur-structured"))
        q = 2.0 * np.eye(6)
        c = np.tile([-2.0, -1.0], 3)
        cons = []
        a_i = np.zeros((6, 6))
        for k in range(3):
            a_i[k, 2 * k] = a_i[k, 2 * k + 1] = 1.0
            a_i[3 + k, 0:2 * (k + 1):2] = 1.0
        for k in range(3):
            cons.append({"type": "ineq",
                         "fun": lambda x, r=k: 2.0 - a_i[r] @ x})
            cons.append({"type": "ineq",
                         "fun": lambda x, r=3 + k: 5.0 - a_i[r] @ x})
            cons.append({"type": "ineq",
                         "fun": lambda x, r=3 + k: a_i[r] @ x + 5.0})
        ref = scipy.optimize.minimize(
            lambda x: 0.5 * x @ q @ x + c @ x, np.zeros(6),
            bounds=[(-3, 3)] * 6, constraints=cons)
        assert ref.success
        assert report.objective == pytest.approx(ref.fun, abs=1e-6)


class TestRestore:
    def test_reduces_violation(self):
        problem = quadratic(np.eye(2), [0.0, 0.0], a_e=[[1.0, 1.0]],
                            b_e=[1.0], x_lower=[-5.0, -5.0],
                            x_upper=[5.0, 5.0])
        xb, sb = problem.x_bounds, problem.s_bounds
        it = Iterate(np.array([3.0, 3.0]), np.zeros(0), np.zeros(1),
                     np.zeros(0), np.full(2, 0.0125), np.full(2, 0.05),
                     np.zeros(0), np.zeros(0), 0.1, xb, sb)
        restored = ipm._restore(problem, it, 0.1, ipm.IpmOptions(),
                                timing_dict())
        assert restored is not None
        c_e = problem.evaluator.eq_constraints(restored.x)
        assert abs(c_e[0]) < abs(3.0 + 3.0 - 1.0)
        assert restored.interior() and restored.duals_positive()

    def test_feasible_entry_returns_none(self):
        problem = quadratic(np.eye(2), [0.0, 0.0], a_e=[[1.0, 1.0]],
                            b_e=[1.0])
        xb, sb = problem.x_bounds, problem.s_bounds
        it = Iterate(np.array([0.5, 0.5]), np.zeros(0), np.zeros(1),
                     np.zeros(0), np.zeros(2), np.zeros(2), np.zeros(0),
                     np.zeros(0), 0.1, xb, sb)
        assert ipm._restore(problem, it, 0.1, ipm.IpmOptions(),
                            timing_dict()) is None
