"""OPF, SCOPF, and MPOPF problem builders with analytic derivatives.

All three models share one scenario block: polar AC power-flow equations
S(theta, v) + S_D - C_G(p + jq) = 0 split into real and imaginary rows,
plus squared apparent-power limits |S_f|^2, |S_t|^2 on rated in-service
branches. First and second derivatives use the complex-matrix calculus
for S = diag(C vc) conj(Y vc); with A = Y^H diag(mu) C,
B = diag(conj(vc)) A diag(vc), D = diag((A vc) conj(vc)),
E = diag((A^T conj(vc)) vc) and G = diag(1/v), the Hessian blocks of
mu^T S over (theta, v) are

    H_tt = B + B^T - D - E        H_vv = G (B + B^T) G
    H_vt = j G (B - B^T - D + E)  H_tv = H_vt^T,

taken elementwise real for the multiplier-weighted Lagrangian term.

SCOPF couples scenarios by sharing the PV-bus voltage magnitudes and
PV-generator active powers as global columns substituted into every
scenario; only the reference generator re-dispatches per contingency.
MPOPF appends storage discharge/charge injections to each period's
p vector and couples periods through cumulative energy inequality rows
whose multipliers form the arrowhead border.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
import scipy.sparse as sp
from numpy.polynomial import polynomial as npoly

from ..nlp import NlpProblem
from ..schur import COUPLING, BlockMap
from .admittance import AdmittanceMatrix, admittance
from .case import Contingency, GridCase


def _power_jacobian(y, c, vc, v):
    """d S / d(theta, v) for S = diag(C vc) conj(Y vc), complex dense."""
    i_br = y @ vc
    cv = c @ vc
    d_th = 1j * (np.conj(i_br)[:, None] * c * vc[None, :]
                 - cv[:, None] * np.conj(y) * np.conj(vc)[None, :])
    e = vc / v
    d_v = (np.conj(i_br)[:, None] * c * e[None, :]
           + cv[:, None] * np.conj(y) * np.conj(e)[None, :])
    return d_th, d_v


def _power_hessian(y, c, vc, v, mu):
    """Real Hessian of Re(mu^T S) over stacked (theta, v)."""
    a = np.conj(y).T @ (mu[:, None] * c)
    b = np.conj(vc)[:, None] * a * vc[None, :]
    d = (a @ vc) * np.conj(vc)
    e = (a.T @ np.conj(vc)) * vc
    f = b + b.T
    g = 1.0 / v
    h_tt = f - np.diag(d + e)
    h_vv = g[:, None] * f * g[None, :]
    h_vt = 1j * g[:, None] * (b - b.T - np.diag(d - e))
    return np.block([[h_tt, h_vt.T], [h_vt, h_vv]]).real


class ScenarioBlock:
    """One scenario or period of the AC network model.

    Local variable order: theta at non-reference buses, v at every bus,
    then the block's p and q injection columns. Constraint rows: 2 n_bus
    balance equalities (real then imaginary), followed by squared flow
    magnitudes at the from ends and then the to ends of rated branches.
    """

    def __init__(self, adm: AdmittanceMatrix, ref: int,
                 c_p: np.ndarray, c_q: np.ndarray, demand: np.ndarray,
                 flow_sel: np.ndarray, flow_caps: np.ndarray):
        nb = adm.n_bus
        self.n_bus = nb
        self.ref = ref
        self.yb = adm.y_bus.toarray()
        self.eye = np.eye(nb)
        sel = np.asarray(flow_sel, dtype=int)
        self.yf = adm.y_from[sel].toarray()
        self.yt = adm.y_to[sel].toarray()
        self.cf = adm.c_from[sel].toarray()
        self.ct = adm.c_to[sel].toarray()
        self.n_sel = sel.size
        self.flow_caps = np.asarray(flow_caps, dtype=float)
        self.c_p = c_p
        self.c_q = c_q
        self.n_p = c_p.shape[1]
        self.n_q = c_q.shape[1]
        self.demand = demand
        self.keep = np.delete(np.arange(nb), ref)
        self.n_loc = (nb - 1) + nb + self.n_p + self.n_q
        self.sl_p = slice(2 * nb - 1, 2 * nb - 1 + self.n_p)
        self.sl_q = slice(2 * nb - 1 + self.n_p, self.n_loc)
        # indices of (theta_kept, v) inside the stacked (theta, v) space
        self.tv = np.concatenate([self.keep, nb + np.arange(nb)])

    @property
    def n_flow(self) -> int:
        return 2 * self.n_sel

    def unpack(self, x):
        nb = self.n_bus
        theta = np.zeros(nb)
        theta[self.keep] = x[:nb - 1]
        v = x[nb - 1:2 * nb - 1]
        return theta, v, x[self.sl_p], x[self.sl_q]

    def _voltage(self, x):
        theta, v, p, q = self.unpack(x)
        return v * np.exp(1j * theta), v, p, q

    def eq_values(self, x) -> np.ndarray:
        vc, v, p, q = self._voltage(x)
        mis = vc * np.conj(self.yb @ vc) + self.demand \
            - self.c_p @ p - 1j * (self.c_q @ q)
        return np.concatenate([mis.real, mis.imag])

    def eq_jacobian(self, x) -> np.ndarray:
        vc, v, p, q = self._voltage(x)
        nb = self.n_bus
        d_th, d_v = _power_jacobian(self.yb, self.eye, vc, v)
        j = np.zeros((2 * nb, self.n_loc))
        j[:nb, :nb - 1] = d_th.real[:, self.keep]
        j[nb:, :nb - 1] = d_th.imag[:, self.keep]
        j[:nb, nb - 1:2 * nb - 1] = d_v.real
        j[nb:, nb - 1:2 * nb - 1] = d_v.imag
        j[:nb, self.sl_p] = -self.c_p
        j[nb:, self.sl_q] = -self.c_q
        return j

    def _flows(self, vc):
        sf = (self.cf @ vc) * np.conj(self.yf @ vc)
        st = (self.ct @ vc) * np.conj(self.yt @ vc)
        return sf, st

    def ineq_values(self, x) -> np.ndarray:
        if self.n_sel == 0:
            return np.zeros(0)
        vc, _, _, _ = self._voltage(x)
        sf, st = self._flows(vc)
        return np.concatenate([np.abs(sf) ** 2, np.abs(st) ** 2])

    def ineq_jacobian(self, x) -> np.ndarray:
        if self.n_sel == 0:
            return np.zeros((0, self.n_loc))
        vc, v, _, _ = self._voltage(x)
        sf, st = self._flows(vc)
        j = np.zeros((self.n_flow, self.n_loc))
        for row, (y, c, s) in enumerate([(self.yf, self.cf, sf),
                                         (self.yt, self.ct, st)]):
            d_th, d_v = _power_jacobian(y, c, vc, v)
            d = 2.0 * (np.conj(s)[:, None] * np.hstack([d_th, d_v])).real
            j[row * self.n_sel:(row + 1) * self.n_sel,
              :2 * self.n_bus - 1] = d[:, self.tv]
        return j

    def hessian(self, x, lam_e, lam_i) -> np.ndarray:
        """Dense constraint-Hessian over the local variables."""
        vc, v, _, _ = self._voltage(x)
        nb = self.n_bus
        mu_bal = lam_e[:nb] - 1j * lam_e[nb:]
        h = _power_hessian(self.yb, self.eye, vc, v, mu_bal)
        if self.n_sel:
            sf, st = self._flows(vc)
            for k, (y, c, s) in enumerate([(self.yf, self.cf, sf),
                                           (self.yt, self.ct, st)]):
                sig = lam_i[k * self.n_sel:(k + 1) * self.n_sel]
                d_th, d_v = _power_jacobian(y, c, vc, v)
                j_c = np.hstack([d_th, d_v])
                h += 2.0 * _power_hessian(y, c, vc, v, sig * np.conj(s))
                h += 2.0 * (j_c.T @ (sig[:, None] * np.conj(j_c))).real
        out = np.zeros((self.n_loc, self.n_loc))
        n_tv = 2 * nb - 1
        out[:n_tv, :n_tv] = h[np.ix_(self.tv, self.tv)]
        return out


def _polyval(coeffs, x):
    return npoly.polyval(x, coeffs)


class GridEvaluator:
    """NlpProblem evaluator over scenario blocks.

    Each block sees the global point through its column map, so shared
    (coupling) variables need no special casing: Jacobian and Hessian
    entries scatter through the map and duplicate coordinates sum.
    Optional linear rows (energy and ramp coupling) are appended after
    the blocks' flow constraints.
    """

    def __init__(self, blocks: List[ScenarioBlock], col_maps, n_x: int,
                 cost_terms, base_mva: float, coupling=None):
        self.blocks = blocks
        self.cols = [np.asarray(c, dtype=int) for c in col_maps]
        self.n_x = n_x
        self.n_e = sum(2 * b.n_bus for b in blocks)
        self.base = base_mva
        self.cost_terms = [(int(c), np.asarray(k, dtype=float))
                           for c, k in cost_terms]
        if coupling is None:
            self.coup_offset, self.coup_rows = np.zeros(0), None
        else:
            self.coup_offset = np.asarray(coupling[0], dtype=float)
            self.coup_rows = sp.csr_matrix(coupling[1])
        self.n_i = sum(b.n_flow for b in blocks) + self.coup_offset.size

    def objective(self, x) -> float:
        base = self.base
        return float(sum(_polyval(k, x[c] * base)
                         for c, k in self.cost_terms))

    def gradient(self, x) -> np.ndarray:
        g = np.zeros(self.n_x)
        base = self.base
        for c, k in self.cost_terms:
            g[c] += base * _polyval(npoly.polyder(k), x[c] * base)
        return g

    def eq_constraints(self, x) -> np.ndarray:
        return np.concatenate([b.eq_values(x[m])
                               for b, m in zip(self.blocks, self.cols)])

    def ineq_constraints(self, x) -> np.ndarray:
        parts = [b.ineq_values(x[m])
                 for b, m in zip(self.blocks, self.cols)]
        if self.coup_rows is not None:
            parts.append(self.coup_offset + self.coup_rows @ x)
        return np.concatenate(parts) if parts else np.zeros(0)

    def _scatter(self, dense_blocks, n_rows):
        rows, cols, vals = [], [], []
        off = 0
        for j, m in zip(dense_blocks, self.cols):
            r, c = np.nonzero(j)
            rows.append(r + off)
            cols.append(m[c])
            vals.append(j[r, c])
            off += j.shape[0]
        if not rows:
            return sp.csr_matrix((n_rows, self.n_x))
        return sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(n_rows, self.n_x))

    def eq_jacobian(self, x) -> sp.csr_matrix:
        return self._scatter([b.eq_jacobian(x[m])
                              for b, m in zip(self.blocks, self.cols)],
                             self.n_e)

    def ineq_jacobian(self, x) -> sp.csr_matrix:
        j = self._scatter([b.ineq_jacobian(x[m])
                           for b, m in zip(self.blocks, self.cols)],
                          self.n_i - self.coup_offset.size)
        if self.coup_rows is None:
            return j
        return sp.vstack([j, self.coup_rows], format="csr")

    def lagrangian_hessian(self, x, lam_e, lam_i, obj_scale) -> sp.csc_matrix:
        rows, cols, vals = [], [], []
        eq_off = 0
        ineq_off = 0
        for b, m in zip(self.blocks, self.cols):
            h = b.hessian(x[m], lam_e[eq_off:eq_off + 2 * b.n_bus],
                          lam_i[ineq_off:ineq_off + b.n_flow])
            r, c = np.nonzero(h)
            gr, gc = m[r], m[c]
            keep = gr >= gc           # lower triangle survives the map
            rows.append(gr[keep])
            cols.append(gc[keep])
            vals.append(h[r, c][keep])
            eq_off += 2 * b.n_bus
            ineq_off += b.n_flow
        base = self.base
        for c, k in self.cost_terms:
            curv = _polyval(npoly.polyder(k, 2), x[c] * base) if k.size > 2 \
                else 0.0
            rows.append(np.array([c]))
            cols.append(np.array([c]))
            vals.append(np.array([obj_scale * base * base * curv]))
        return sp.csc_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.n_x, self.n_x))


def _mid(lo: float, hi: float) -> float:
    if np.isfinite(lo) and np.isfinite(hi):
        return 0.5 * (lo + hi)
    if np.isfinite(lo):
        return lo + 1.0
    if np.isfinite(hi):
        return hi - 1.0
    return 0.0


def _gen_connection(case: GridCase, gen_idx: Sequence[int],
                    with_storage: bool):
    nb = case.n_bus
    n_s = case.n_storage if with_storage else 0
    c_p = np.zeros((nb, len(gen_idx) + 2 * n_s))
    c_q = np.zeros((nb, len(gen_idx)))
    for j, g in enumerate(gen_idx):
        b = case.bus_index(case.gens[g].bus)
        c_p[b, j] = 1.0
        c_q[b, j] = 1.0
    for i in range(n_s):
        b = case.bus_index(case.storage[i].bus)
        c_p[b, len(gen_idx) + i] = 1.0            # discharge
        c_p[b, len(gen_idx) + n_s + i] = 1.0      # charge
    return c_p, c_q


def _flow_selection(case: GridCase, adm: AdmittanceMatrix):
    rows = [r for r, k in enumerate(adm.branch_rows)
            if case.branches[k].rate_mva > 0]
    caps = np.array([(case.branches[adm.branch_rows[r]].rate_mva
                      / case.base_mva) ** 2 for r in rows])
    return np.array(rows, dtype=int), np.concatenate([caps, caps])


def _block_bounds(case: GridCase, gen_idx, with_storage: bool):
    nb = case.n_bus
    base = case.base_mva
    n_s = case.n_storage if with_storage else 0
    lo = [np.full(nb - 1, -np.inf), np.array([b.v_min for b in case.buses])]
    hi = [np.full(nb - 1, np.inf), np.array([b.v_max for b in case.buses])]
    lo.append(np.concatenate(
        [[case.gens[g].p_min / base for g in gen_idx],
         [0.0] * n_s,
         [case.storage[i].p_min / base for i in range(n_s)]]))
    hi.append(np.concatenate(
        [[case.gens[g].p_max / base for g in gen_idx],
         [case.storage[i].p_max / base for i in range(n_s)],
         [0.0] * n_s]))
    lo.append(np.array([case.gens[g].q_min / base for g in gen_idx]))
    hi.append(np.array([case.gens[g].q_max / base for g in gen_idx]))
    x_lo, x_hi = np.concatenate(lo), np.concatenate(hi)
    start = np.array([_mid(a, b) for a, b in zip(x_lo, x_hi)])
    start[:nb - 1] = 0.0
    v0 = np.array([1.0 if b.v_min < 1.0 < b.v_max
                   else _mid(b.v_min, b.v_max) for b in case.buses])
    start[nb - 1:2 * nb - 1] = v0
    return x_lo, x_hi, start


def _scenario(case: GridCase, adm: AdmittanceMatrix, gen_idx,
              with_storage: bool, period: int):
    c_p, c_q = _gen_connection(case, gen_idx, with_storage)
    sel, caps = _flow_selection(case, adm)
    block = ScenarioBlock(adm, case.ref_index, c_p, c_q,
                          case.demand(period), sel, caps)
    x_lo, x_hi, start = _block_bounds(case, gen_idx, with_storage)
    return block, x_lo, x_hi, start


def build_opf(case: GridCase) -> NlpProblem:
    """Single-period AC OPF over the first period's demand.

    Storage units are ignored here; they only act through the
    multiperiod energy coupling.
    """
    adm = admittance(case)
    gen_idx = list(range(case.n_gen))
    block, x_lo, x_hi, start = _scenario(case, adm, gen_idx, False, 0)
    cols = np.arange(block.n_loc)
    cost = [(cols[block.sl_p][j], case.gens[g].cost)
            for j, g in enumerate(gen_idx)]
    ev = GridEvaluator([block], [cols], block.n_loc, cost, case.base_mva)
    structure = BlockMap(
        x_labels=np.zeros(block.n_loc, dtype=int),
        eq_labels=np.zeros(2 * block.n_bus, dtype=int),
        ineq_labels=np.zeros(block.n_flow, dtype=int),
        n_blocks=1)
    return NlpProblem.create(
        block.n_loc, ev.n_e, ev.n_i, x_lo, x_hi,
        np.full(ev.n_i, -np.inf), block.flow_caps,
        ev, structure=structure, start=start,
        name=f"opf-{case.name}" if case.name else "opf")


@dataclass
class ScopfModel:
    problem: NlpProblem
    structure: BlockMap


@dataclass
class MpopfModel:
    problem: NlpProblem
    structure: BlockMap
    c_0: np.ndarray
    c_1: np.ndarray


def build_scopf(case: GridCase,
                contingencies: Optional[Sequence[Contingency]] = None
                ) -> ScopfModel:
    """Security-constrained OPF over the nominal and contingency states.

    Scenario coupling is by substitution: PV-bus voltage magnitudes and
    PV-generator active powers are single global columns referenced by
    every scenario, so the nonanticipatory equalities hold identically.
    With an empty contingency list the result degenerates to plain OPF
    with a one-block structure annotation.
    """
    conts = (list(case.contingencies) if contingencies is None
             else list(contingencies))
    scenarios = [None] + conts
    n_scen = len(scenarios)
    nb = case.n_bus
    pv = [i for i, b in enumerate(case.buses) if b.btype == "PV"]
    coupled_gens = [g for g, gen in enumerate(case.gens)
                    if case.buses[case.bus_index(gen.bus)].btype == "PV"]
    share = n_scen > 1
    n_shared = (len(pv) + len(coupled_gens)) if share else 0
    pv_slot = {b: j for j, b in enumerate(pv)}
    gen_slot = {g: len(pv) + j for j, g in enumerate(coupled_gens)}

    blocks, col_maps, labels = [], [], []
    x_lo = np.zeros(0)
    x_hi = np.zeros(0)
    start = np.zeros(0)
    shared_lo = np.full(n_shared, -np.inf)
    shared_hi = np.full(n_shared, np.inf)
    shared_start = np.zeros(n_shared)
    eq_labels, ineq_labels = [], []
    c_upper = []
    local_base = 0
    shared_seen = np.zeros(n_shared, dtype=bool)
    scen_ranges = []

    for s, cont in enumerate(scenarios):
        adm = admittance(case, cont)
        gen_idx = [g for g in range(case.n_gen)
                   if not (cont is not None and cont.kind == "gen"
                           and cont.index == g)]
        block, b_lo, b_hi, b_start = _scenario(case, adm, gen_idx, False, 0)
        cmap = np.full(block.n_loc, -1, dtype=int)
        local = []
        for j in range(block.n_loc):
            slot = None
            if share:
                if (nb - 1) <= j < (2 * nb - 1):
                    bus = j - (nb - 1)
                    if bus in pv_slot:
                        slot = pv_slot[bus]
                elif block.sl_p.start <= j < block.sl_p.stop:
                    g = gen_idx[j - block.sl_p.start]
                    if g in gen_slot:
                        slot = gen_slot[g]
            if slot is None:
                local.append(j)
            else:
                cmap[j] = -(slot + 2)     # provisional shared marker
                if not shared_seen[slot]:
                    shared_lo[slot] = b_lo[j]
                    shared_hi[slot] = b_hi[j]
                    shared_start[slot] = b_start[j]
                    shared_seen[slot] = True
        local = np.array(local, dtype=int)
        cmap[local] = local_base + np.arange(local.size)
        scen_ranges.append((local_base, local_base + local.size))
        local_base += local.size
        x_lo = np.concatenate([x_lo, b_lo[local]])
        x_hi = np.concatenate([x_hi, b_hi[local]])
        start = np.concatenate([start, b_start[local]])
        labels.append(np.full(local.size, s, dtype=int))
        eq_labels.append(np.full(2 * nb, s, dtype=int))
        ineq_labels.append(np.full(block.n_flow, s, dtype=int))
        c_upper.append(block.flow_caps)
        blocks.append(block)
        col_maps.append(cmap)

    for cmap in col_maps:                 # resolve shared markers
        shared = cmap < -1
        cmap[shared] = local_base + (-cmap[shared] - 2)
    n_x = local_base + n_shared
    x_lo = np.concatenate([x_lo, shared_lo])
    x_hi = np.concatenate([x_hi, shared_hi])
    start = np.concatenate([start, shared_start])
    x_labels = np.concatenate(labels + [np.full(n_shared, COUPLING)])

    nominal_p = col_maps[0][blocks[0].sl_p]
    cost = [(nominal_p[g], case.gens[g].cost) for g in range(case.n_gen)]
    ev = GridEvaluator(blocks, col_maps, n_x, cost, case.base_mva)
    structure = BlockMap(
        x_labels=x_labels,
        eq_labels=np.concatenate(eq_labels),
        ineq_labels=np.concatenate(ineq_labels),
        n_blocks=n_scen)
    caps = np.concatenate(c_upper) if c_upper else np.zeros(0)
    problem = NlpProblem.create(
        n_x, ev.n_e, ev.n_i, x_lo, x_hi,
        np.full(ev.n_i, -np.inf), caps,
        ev, structure=structure, start=start,
        name=f"scopf-{case.name}" if case.name else "scopf")
    return ScopfModel(problem, structure)


def storage_matrix(case: GridCase) -> np.ndarray:
    """Energy update matrix over (discharge, charge) injections in MW:
    one hour of unit discharge drains dt/eta_d, one hour of unit
    charging (negative injection) stores dt*eta_c."""
    eta_d = np.array([s.eta_d for s in case.storage])
    eta_c = np.array([s.eta_c for s in case.storage])
    return np.hstack([np.diag(-case.dt / eta_d), np.diag(-case.dt * eta_c)])


def build_mpopf(case: GridCase, n_periods: Optional[int] = None,
                ramp: Optional[np.ndarray] = None) -> MpopfModel:
    """Multiperiod OPF with storage coupling.

    Each period is a full AC block whose p vector carries the generator
    outputs plus per-unit storage discharge (>= 0) and charge (<= 0)
    columns. Stored energy never becomes a variable: the rows

        e_min <= e_0 + sum_{m<=n} B^S p^S_m <= e_max

    (in MWh, period-major then unit) couple the periods, and their
    multipliers are the only border of the arrowhead. Energy slacks stay
    explicit and belong to their own period; flow slacks are eliminated
    all-or-nothing across periods so every diagonal block keeps the same
    dimension. Optional generator ramp limits (MW per hour, one entry
    per generator) add |p_{n} - p_{n-1}| <= ramp*dt rows; they widen the
    border beyond the replicated pattern, so the structured backend only
    applies while they are disabled.
    """
    n = case.n_periods if n_periods is None else int(n_periods)
    if n < 1:
        raise ValueError("period count must be at least 1")
    adm = admittance(case)
    gen_idx = list(range(case.n_gen))
    ns = case.n_storage
    base = case.base_mva

    blocks, col_maps = [], []
    x_lo, x_hi, start = [], [], []
    n_loc = None
    for t in range(n):
        block, b_lo, b_hi, b_start = _scenario(case, adm, gen_idx, True, t)
        n_loc = block.n_loc
        col_maps.append(t * n_loc + np.arange(n_loc))
        blocks.append(block)
        x_lo.append(b_lo)
        x_hi.append(b_hi)
        start.append(b_start)
    n_x = n * n_loc
    sl_p = blocks[0].sl_p
    n_flow = blocks[0].n_flow

    b_s = base * storage_matrix(case) if ns else np.zeros((0, 0))
    rows, cols, vals = [], [], []
    for k in range(n):
        for i in range(ns):
            row = k * ns + i
            for m in range(k + 1):
                psd = m * n_loc + sl_p.start + len(gen_idx) + i
                psc = psd + ns
                rows.extend([row, row])
                cols.extend([psd, psc])
                vals.extend([b_s[i, i], b_s[i, ns + i]])
    energy_rows = sp.csr_matrix((vals, (rows, cols)), shape=(n * ns, n_x))
    e_0 = np.array([s.e_0 for s in case.storage])
    offset = np.tile(e_0, n)
    e_lo = np.tile([s.e_min for s in case.storage], n)
    e_hi = np.tile([s.e_max for s in case.storage], n)

    coup_rows = [energy_rows]
    coup_offset = [offset]
    coup_lo = [e_lo]
    coup_hi = [e_hi]
    coup_labels = [np.repeat(np.arange(n), ns)]
    if ramp is not None:
        ramp = np.asarray(ramp, dtype=float)
        if ramp.shape != (case.n_gen,):
            raise ValueError("ramp needs one MW-per-hour entry per generator")
        r_rows, r_cols, r_vals = [], [], []
        for t in range(1, n):
            for j in range(case.n_gen):
                row = (t - 1) * case.n_gen + j
                r_rows.extend([row, row])
                r_cols.extend([t * n_loc + sl_p.start + j,
                               (t - 1) * n_loc + sl_p.start + j])
                r_vals.extend([base, -base])
        coup_rows.append(sp.csr_matrix((r_vals, (r_rows, r_cols)),
                                       shape=((n - 1) * case.n_gen, n_x)))
        coup_offset.append(np.zeros((n - 1) * case.n_gen))
        coup_lo.append(np.tile(-ramp * case.dt, n - 1))
        coup_hi.append(np.tile(ramp * case.dt, n - 1))
        coup_labels.append(np.repeat(np.arange(1, n), case.n_gen))
    n_coup = sum(r.shape[0] for r in coup_rows)

    cost = [(int(col_maps[t][sl_p][j]), case.gens[g].cost)
            for t in range(n) for j, g in enumerate(gen_idx)]
    coupling = None
    if n_coup:
        coupling = (np.concatenate(coup_offset),
                    sp.vstack(coup_rows, format="csr"))
    ev = GridEvaluator(blocks, col_maps, n_x, cost, base, coupling)

    flow_labels = np.repeat(np.arange(n), n_flow)
    ineq_labels = np.concatenate([flow_labels,
                                  np.full(n_coup, COUPLING)]).astype(int)
    slack_labels = np.concatenate([flow_labels] + coup_labels).astype(int)
    keep = np.concatenate([np.zeros(n * n_flow, dtype=bool),
                           np.ones(n_coup, dtype=bool)])
    groups = np.concatenate([np.tile(np.arange(n_flow), n),
                             n_flow + np.arange(n_coup)]).astype(int)
    structure = BlockMap(
        x_labels=np.repeat(np.arange(n), n_loc),
        eq_labels=np.repeat(np.arange(n), 2 * case.n_bus),
        ineq_labels=ineq_labels,
        n_blocks=n,
        keep_slacks=keep,
        slack_groups=groups,
        slack_labels=slack_labels)

    c_lo = np.concatenate([np.full(n * n_flow, -np.inf)] + coup_lo)
    c_hi = np.concatenate([np.tile(blocks[0].flow_caps, n)] + coup_hi)
    problem = NlpProblem.create(
        n_x, ev.n_e, ev.n_i, np.concatenate(x_lo), np.concatenate(x_hi),
        c_lo, c_hi, ev, structure=structure,
        start=np.concatenate(start),
        name=f"mpopf-{case.name}" if case.name else "mpopf")

    c_0 = np.zeros((ns, n_loc + ns))
    for i in range(ns):
        c_0[i, sl_p.start + len(gen_idx) + i] = b_s[i, i]
        c_0[i, sl_p.start + len(gen_idx) + ns + i] = b_s[i, ns + i]
    c_1 = c_0.copy()
    c_1[:, n_loc:] = -np.eye(ns)
    return MpopfModel(problem, structure, c_0, c_1)
