"""Certified bounds on equilibrium expectation values of quantum lattice models."""

from .bounds import BoundReport, compute_bounds
from .kms_commuting import build_commuting, build_commuting_relaxation
from .lattice import InteractionSpec, Window, classical_ising, load_model, parse_model, tfising
from .moments import MomentFunctional
from .pauli import PauliOperator, PauliString, parse_operator
from .relaxation import RelaxationConfig, build, build_relaxation, scalar_eeb_check
from .solvers import SolveResult, solve

__version__ = "0.1.0"

__all__ = [
    "BoundReport",
    "InteractionSpec",
    "MomentFunctional",
    "PauliOperator",
    "PauliString",
    "RelaxationConfig",
    "SolveResult",
    "Window",
    "build",
    "build_commuting",
    "build_commuting_relaxation",
    "build_relaxation",
    "classical_ising",
    "compute_bounds",
    "load_model",
    "parse_model",
    "parse_operator",
    "scalar_eeb_check",
    "solve",
    "tfising",
]
