"""Improvable upper bounds to the piezoelectric polaron ground-state energy.

Vacuum moments of the displaced momentum-frame Hamiltonian are computed
exactly by Wick pairing and turned into a non-increasing sequence of
upper bounds by the moment (Lanczos) method.
"""
__version__ = "0.1.0"

from .errors import (
    ConvergenceError,
    DegenerateMomentsError,
    DomainError,
    NumericError,
    PolaronError,
    RegimeError,
    ResourceError,
)
from .model import FChoice, MaterialConstants, ModelParams, build_hamiltonian, coupling_from_material
from .bounds import BoundResult, bound_sequence, second_order_closed_form, solve_bound
from .reference import closed_forms, lower_bound_large, lower_bound_small
from .wick import Measure, Mode, central_moment, mean_energy, moment_vector, vacuum_moment
from .fock import fock_oracle
from .moving import effective_mass, moving_bound, solve_eta

__all__ = [
    "__version__",
    "PolaronError",
    "DomainError",
    "RegimeError",
    "ConvergenceError",
    "NumericError",
    "ResourceError",
    "DegenerateMomentsError",
    "FChoice",
    "MaterialConstants",
    "ModelParams",
    "build_hamiltonian",
    "coupling_from_material",
    "BoundResult",
    "solve_bound",
    "bound_sequence",
    "second_order_closed_form",
    "closed_forms",
    "lower_bound_small",
    "lower_bound_large",
    "Measure",
    "Mode",
    "vacuum_moment",
    "central_moment",
    "mean_energy",
    "moment_vector",
    "fock_oracle",
    "solve_eta",
    "moving_bound",
    "effective_mass",
]
