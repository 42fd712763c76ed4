"""Passivity, KYP inequalities and port-Hamiltonian structure of linear
time-varying systems."""

from .expr import TimeExpr, parse
from .matfun import MatrixFunction, constant, eye, matrix, zeros
from .ltv import LtvSystem, Trajectory, simulate, state_transition, supply
from .dissipativity import StorageCandidate, kyp_check, kyp_matrix
from .ph import PhRepresentation, assemble_system, canonical_ph

__all__ = [
    "TimeExpr", "parse", "MatrixFunction", "constant", "eye", "matrix", "zeros",
    "LtvSystem", "Trajectory", "simulate", "state_transition", "supply",
    "StorageCandidate", "kyp_check", "kyp_matrix", "PhRepresentation",
    "assemble_system", "canonical_ph",
]
__version__ = "0.1.0"
