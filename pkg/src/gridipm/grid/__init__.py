"""Grid-model front end: case parsing, admittance assembly, and the
OPF / SCOPF / MPOPF problem builders."""

from .case import (Bus, Branch, Generator, Storage, Contingency, GridCase,
                   CaseError, CaseSyntaxError, CaseSemanticError,
                   ConnectivityError, parse_case, load_case)
from .admittance import AdmittanceMatrix, admittance
from .model import (build_opf, build_scopf, build_mpopf,
                    ScopfModel, MpopfModel, storage_matrix)

__all__ = [
    "Bus", "Branch", "Generator", "Storage", "Contingency", "GridCase",
    "CaseError", "CaseSyntaxError", "CaseSemanticError", "ConnectivityError",
    "parse_case", "load_case", "AdmittanceMatrix", "admittance",
    "build_opf", "build_scopf", "build_mpopf", "ScopfModel", "MpopfModel",
    "storage_matrix",
]
