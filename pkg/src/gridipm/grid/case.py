"""Case file parser and the validated grid data model.

The format is a line-oriented text file with sectioned tables, chosen
over binary containers so cases diff cleanly under version control.
Grammar (# starts a comment, blank lines ignored, all tables terminated
by END):

    NAME <identifier>                         optional
    BASEMVA <S_base in MVA>                   required
    PERIODS <count> <step hours>              optional, default "1 1.0"
    BUS                                       required, one row per bus
      <id> <ref|PV|PQ> <v_min> <v_max> <P_d MW> <Q_d MVAr>
    END
    BRANCH                                    required
      <from> <to> <r> <x> <b_c> <tap> <shift deg> <rate MVA>
    END
    GEN                                       required
      <bus> <p_min> <p_max> <q_min> <q_max> <c0> <c1> <c2> [c3]
    END
    STORAGE                                   optional
      <bus> <e_min MWh> <e_max> <e_0> <p_min MW> <p_max> <eta_c> <eta_d>
    END
    DEMAND                                    optional, scale per period
      <period (1-based)> <scale>
    END
    CONTINGENCY                               optional
      <branch|gen> <element index, 1-based in section order>
    END

Impedances are in per unit on the system base, tap is the off-nominal
ratio on the from side (1 = nominal), rate 0 means unlimited, and cost
coefficients are $/h against the real power output in MW, ascending
degree. Demand periods not listed default to scale 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

BUS_TYPES = ("ref", "PV", "PQ")


class CaseError(Exception):
    """Base for everything raised while reading or validating a case."""


class CaseSyntaxError(CaseError):
    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")


class CaseSemanticError(CaseError):
    pass


class ConnectivityError(CaseError):
    pass


@dataclass
class Bus:
    id: int
    btype: str
    v_min: float
    v_max: float
    pd: float                   # MW, base-period demand
    qd: float                   # MVAr


@dataclass
class Branch:
    from_bus: int
    to_bus: int
    r: float
    x: float
    b_c: float                  # total line charging susceptance
    tap: float
    shift_deg: float
    rate_mva: float             # 0 = unlimited


@dataclass
class Generator:
    bus: int
    p_min: float
    p_max: float
    q_min: float
    q_max: float
    cost: np.ndarray            # ascending coefficients, degree <= 3

    def cost_value(self, p_mw: float) -> float:
        return float(np.polynomial.polynomial.polyval(p_mw, self.cost))


@dataclass
class Storage:
    bus: int
    e_min: float                # MWh
    e_max: float
    e_0: float
    p_min: float                # MW, charging bound (<= 0)
    p_max: float                # MW, discharging bound (>= 0)
    eta_c: float
    eta_d: float


@dataclass
class Contingency:
    kind: str                   # "branch" | "gen"
    index: int                  # 0-based into case.branches / case.gens


@dataclass
class GridCase:
    base_mva: float
    buses: List[Bus]
    branches: List[Branch]
    gens: List[Generator]
    storage: List[Storage] = field(default_factory=list)
    contingencies: List[Contingency] = field(default_factory=list)
    n_periods: int = 1
    dt: float = 1.0
    demand_scale: Optional[np.ndarray] = None
    name: str = ""

    def __post_init__(self):
        if self.demand_scale is None:
            self.demand_scale = np.ones(self.n_periods)
        self._index = {b.id: i for i, b in enumerate(self.buses)}

    @property
    def n_bus(self) -> int:
        return len(self.buses)

    @property
    def n_branch(self) -> int:
        return len(self.branches)

    @property
    def n_gen(self) -> int:
        return len(self.gens)

    @property
    def n_storage(self) -> int:
        return len(self.storage)

    def bus_index(self, bus_id: int) -> int:
        try:
            return self._index[bus_id]
        except KeyError:
            raise CaseSemanticError(f"unknown bus id {bus_id}") from None

    @property
    def ref_index(self) -> int:
        return next(i for i, b in enumerate(self.buses) if b.btype == "ref")

    @property
    def pv_indices(self) -> np.ndarray:
        return np.array([i for i, b in enumerate(self.buses)
                         if b.btype == "PV"], dtype=int)

    def scale(self, period: int) -> float:
        """Demand multiplier for a 0-based period, 1 beyond the table."""
        if period < self.demand_scale.size:
            return float(self.demand_scale[period])
        return 1.0

    def demand(self, period: int = 0) -> np.ndarray:
        """Complex bus demand in per unit for one period."""
        s = self.scale(period)
        d = np.array([complex(b.pd, b.qd) for b in self.buses])
        return s * d / self.base_mva


def _tokens(line: str) -> List[str]:
    return line.split("#", 1)[0].split()


def _floats(parts, line, what):
    try:
        return [float(p) for p in parts]
    except ValueError:
        raise CaseSyntaxError(line, f"bad number in {what} row") from None


def _read_table(lines, start, section, width, parse_row):
    """Consume rows until END, returning (rows, index after END)."""
    rows = []
    i = start
    while i < len(lines):
        parts = _tokens(lines[i])
        if not parts:
            i += 1
            continue
        if parts == ["END"]:
            return rows, i + 1
        lo, hi = width if isinstance(width, tuple) else (width, width)
        if not lo <= len(parts) <= hi:
            want = str(lo) if lo == hi else f"{lo}..{hi}"
            raise CaseSyntaxError(
                i + 1, f"{section} row needs {want} fields, got {len(parts)}")
        rows.append(parse_row(parts, i + 1))
        i += 1
    raise CaseSyntaxError(len(lines), f"{section} section missing END")


def parse_case(text: str, name: str = "") -> GridCase:
    """Parse case text into a validated GridCase.

    Raises CaseSyntaxError (with a 1-based line number) for malformed
    input and CaseSemanticError / ConnectivityError for well-formed
    input that does not describe a usable grid.
    """
    lines = text.splitlines()
    base_mva = None
    n_periods, dt = 1, 1.0
    buses: List[Bus] = []
    branches: List[Branch] = []
    gens: List[Generator] = []
    storage: List[Storage] = []
    demand_rows = []
    contingency_rows = []
    seen = set()

    def bus_row(parts, ln):
        if parts[1] not in BUS_TYPES:
            raise CaseSyntaxError(ln, f"bus type must be one of {BUS_TYPES}")
        try:
            bid = int(parts[0])
        except ValueError:
            raise CaseSyntaxError(ln, "bus id must be an integer") from None
        vals = _floats(parts[2:], ln, "BUS")
        return Bus(bid, parts[1], *vals)

    def branch_row(parts, ln):
        vals = _floats(parts, ln, "BRANCH")
        return Branch(int(vals[0]), int(vals[1]), *vals[2:])

    def gen_row(parts, ln):
        vals = _floats(parts, ln, "GEN")
        return Generator(int(vals[0]), *vals[1:5], cost=np.array(vals[5:]))

    def storage_row(parts, ln):
        vals = _floats(parts, ln, "STORAGE")
        return Storage(int(vals[0]), *vals[1:])

    def demand_row(parts, ln):
        vals = _floats(parts, ln, "DEMAND")
        return (int(vals[0]), vals[1], ln)

    def contingency_row(parts, ln):
        if parts[0] not in ("branch", "gen"):
            raise CaseSyntaxError(ln, "contingency kind must be branch or gen")
        try:
            return (parts[0], int(parts[1]), ln)
        except ValueError:
            raise CaseSyntaxError(ln, "contingency index must be an integer") \
                from None

    i = 0
    case_name = name
    while i < len(lines):
        parts = _tokens(lines[i])
        if not parts:
            i += 1
            continue
        key = parts[0]
        ln = i + 1
        if key in seen:
            raise CaseSyntaxError(ln, f"duplicate {key} section")
        seen.add(key)
        if key == "NAME":
            if len(parts) != 2:
                raise CaseSyntaxError(ln, "NAME takes one identifier")
            case_name = parts[1]
            i += 1
        elif key == "BASEMVA":
            if len(parts) != 2:
                raise CaseSyntaxError(ln, "BASEMVA takes one value")
            base_mva = _floats(parts[1:], ln, "BASEMVA")[0]
            i += 1
        elif key == "PERIODS":
            if len(parts) != 3:
                raise CaseSyntaxError(ln, "PERIODS takes count and step")
            vals = _floats(parts[1:], ln, "PERIODS")
            n_periods, dt = int(vals[0]), vals[1]
            i += 1
        elif key == "BUS":
            buses, i = _read_table(lines, i + 1, "BUS", 6, bus_row)
        elif key == "BRANCH":
            branches, i = _read_table(lines, i + 1, "BRANCH", 8, branch_row)
        elif key == "GEN":
            gens, i = _read_table(lines, i + 1, "GEN", (8, 9), gen_row)
        elif key == "STORAGE":
            storage, i = _read_table(lines, i + 1, "STORAGE", 8, storage_row)
        elif key == "DEMAND":
            demand_rows, i = _read_table(lines, i + 1, "DEMAND", 2, demand_row)
        elif key == "CONTINGENCY":
            contingency_rows, i = _read_table(
                lines, i + 1, "CONTINGENCY", 2, contingency_row)
        else:
            raise CaseSyntaxError(ln, f"unknown keyword {key!r}")

    if base_mva is None:
        raise CaseSemanticError("BASEMVA not given")
    if not buses:
        raise CaseSemanticError("case has no buses")
    if not branches and len(buses) > 1:
        raise CaseSemanticError("case has no branches")
    if not gens:
        raise CaseSemanticError("case has no generators")

    scale = np.ones(n_periods)
    listed = set()
    for period, value, ln in demand_rows:
        if not 1 <= period <= n_periods:
            raise CaseSemanticError(
                f"line {ln}: demand period {period} outside 1..{n_periods}")
        if period in listed:
            raise CaseSemanticError(f"line {ln}: duplicate demand period")
        if value < 0:
            raise CaseSemanticError(f"line {ln}: negative demand scale")
        listed.add(period)
        scale[period - 1] = value

    contingencies = []
    for kind, idx, ln in contingency_rows:
        count = len(branches) if kind == "branch" else len(gens)
        if not 1 <= idx <= count:
            raise CaseSemanticError(
                f"line {ln}: {kind} contingency index {idx} outside 1..{count}")
        contingencies.append(Contingency(kind, idx - 1))

    case = GridCase(base_mva, buses, branches, gens, storage, contingencies,
                    n_periods, dt, scale, case_name)
    validate_case(case)
    return case


def load_case(path) -> GridCase:
    with open(path) as fh:
        text = fh.read()
    return parse_case(text)


def validate_case(case: GridCase) -> None:
    ids = [b.id for b in case.buses]
    if len(set(ids)) != len(ids):
        raise CaseSemanticError("duplicate bus id")
    refs = [b for b in case.buses if b.btype == "ref"]
    if not refs:
        raise CaseSemanticError("no reference bus")
    if len(refs) > 1:
        raise CaseSemanticError("more than one reference bus")
    if case.base_mva <= 0:
        raise CaseSemanticError("base MVA must be positive")
    if case.n_periods < 1 or case.dt <= 0:
        raise CaseSemanticError("period count and step must be positive")

    for b in case.buses:
        if not 0 < b.v_min <= b.v_max:
            raise CaseSemanticError(f"bus {b.id}: voltage bounds out of order")

    known = set(ids)
    for k, br in enumerate(case.branches):
        if br.from_bus not in known or br.to_bus not in known:
            raise CaseSemanticError(f"branch {k + 1}: dangling endpoint")
        if br.from_bus == br.to_bus:
            raise CaseSemanticError(f"branch {k + 1}: self loop")
        if br.r == 0 and br.x == 0:
            raise CaseSemanticError(f"branch {k + 1}: zero impedance")
        if br.tap <= 0:
            raise CaseSemanticError(f"branch {k + 1}: tap must be positive")
        if br.rate_mva < 0:
            raise CaseSemanticError(f"branch {k + 1}: negative rating")

    for k, g in enumerate(case.gens):
        if g.bus not in known:
            raise CaseSemanticError(f"generator {k + 1}: unknown bus {g.bus}")
        if g.p_min > g.p_max or g.q_min > g.q_max:
            raise CaseSemanticError(f"generator {k + 1}: bounds out of order")
        if not 1 <= g.cost.size <= 4:
            raise CaseSemanticError(
                f"generator {k + 1}: cost polynomial degree above 3")

    gen_buses = {g.bus for g in case.gens}
    for b in case.buses:
        if b.btype in ("ref", "PV") and b.id not in gen_buses:
            raise CaseSemanticError(f"{b.btype} bus {b.id} has no generator")

    for k, s in enumerate(case.storage):
        if s.bus not in known:
            raise CaseSemanticError(f"storage {k + 1}: unknown bus {s.bus}")
        if not s.e_min <= s.e_0 <= s.e_max:
            raise CaseSemanticError(
                f"storage {k + 1}: initial level outside energy bounds")
        if not s.p_min <= 0 <= s.p_max:
            raise CaseSemanticError(
                f"storage {k + 1}: power bounds must bracket zero")
        for eta in (s.eta_c, s.eta_d):
            if not 0 < eta <= 1:
                raise CaseSemanticError(
                    f"storage {k + 1}: efficiency outside (0, 1]")

    if not connected(case):
        raise ConnectivityError("base network is not connected")
    for c in case.contingencies:
        if c.kind == "branch" and not connected(case, skip_branch=c.index):
            br = case.branches[c.index]
            raise ConnectivityError(
                f"outage of branch {c.index + 1} "
                f"({br.from_bus}-{br.to_bus}) disconnects the network")


def connected(case: GridCase, skip_branch: Optional[int] = None) -> bool:
    """Breadth-first connectivity over in-service branches."""
    n = case.n_bus
    adj = [[] for _ in range(n)]
    for k, br in enumerate(case.branches):
        if k == skip_branch:
            continue
        i, j = case.bus_index(br.from_bus), case.bus_index(br.to_bus)
        adj[i].append(j)
        adj[j].append(i)
    seen = np.zeros(n, dtype=bool)
    stack = [0]
    seen[0] = True
    while stack:
        for j in adj[stack.pop()]:
            if not seen[j]:
                seen[j] = True
                stack.append(j)
    return bool(seen.all())
