"""Pi-model admittance assembly, with contingency variants.

Each branch from f to t with series admittance y_s = 1/(r + jx), total
charging b_c, off-nominal tap ratio tau on the from side and phase
shift sigma contributes the standard two-port stamp

    y_ff = (y_s + j b_c/2) / tau^2        y_ft = -y_s / (tau e^{-j sigma})
    y_tf = -y_s / (tau e^{j sigma})       y_tt =  y_s + j b_c/2

to the bus matrix, and the corresponding rows of the from/to branch
matrices map bus voltages to the current injected at each line end.
A branch outage drops exactly that branch's stamp and rows; a generator
outage leaves the network matrices untouched.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .case import Contingency, ConnectivityError, GridCase, connected


@dataclass
class AdmittanceMatrix:
    y_bus: sp.csc_matrix        # n_bus x n_bus, complex
    y_from: sp.csr_matrix       # n_active x n_bus
    y_to: sp.csr_matrix
    c_from: sp.csr_matrix       # 0/1 end selectors, n_active x n_bus
    c_to: sp.csr_matrix
    branch_rows: np.ndarray     # case branch index behind each row

    @property
    def n_bus(self) -> int:
        return self.y_bus.shape[0]


def admittance(case: GridCase,
               contingency: Optional[Contingency] = None) -> AdmittanceMatrix:
    """Assemble network matrices, optionally under one contingency."""
    skip = None
    if contingency is not None and contingency.kind == "branch":
        skip = contingency.index
        if not 0 <= skip < case.n_branch:
            raise ValueError(f"branch index {skip} out of range")
        if not connected(case, skip_branch=skip):
            br = case.branches[skip]
            raise ConnectivityError(
                f"outage of branch {skip + 1} "
                f"({br.from_bus}-{br.to_bus}) disconnects the network")
    elif contingency is not None and not 0 <= contingency.index < case.n_gen:
        raise ValueError(f"generator index {contingency.index} out of range")

    n = case.n_bus
    rows = [k for k in range(case.n_branch) if k != skip]
    nl = len(rows)
    yf = np.zeros((nl, 2), dtype=complex)
    yt = np.zeros((nl, 2), dtype=complex)
    ends = np.zeros((nl, 2), dtype=int)
    for r, k in enumerate(rows):
        br = case.branches[k]
        f, t = case.bus_index(br.from_bus), case.bus_index(br.to_bus)
        y_s = 1.0 / complex(br.r, br.x)
        y_sh = complex(0.0, br.b_c / 2.0)
        tap = br.tap * np.exp(1j * np.deg2rad(br.shift_deg))
        yf[r] = [(y_s + y_sh) / (br.tap ** 2), -y_s / np.conj(tap)]
        yt[r] = [-y_s / tap, y_s + y_sh]
        ends[r] = [f, t]

    ridx = np.repeat(np.arange(nl), 2)
    y_from = sp.csr_matrix((yf.ravel(), (ridx, ends.ravel())), shape=(nl, n))
    y_to = sp.csr_matrix((yt.ravel(), (ridx, ends.ravel())), shape=(nl, n))
    ones = np.ones(nl)
    c_from = sp.csr_matrix((ones, (np.arange(nl), ends[:, 0])), shape=(nl, n))
    c_to = sp.csr_matrix((ones, (np.arange(nl), ends[:, 1])), shape=(nl, n))
    y_bus = (c_from.T @ y_from + c_to.T @ y_to).tocsc()
    return AdmittanceMatrix(y_bus, y_from, y_to, c_from, c_to,
                            np.array(rows, dtype=int))
