"""Exact-diagonalization laboratory for superadiabatic theory of lattice fermions."""

from .adiabatic import AdiabaticFamily, defect, expansion_order2, first_order_blocks, kato_generator
from .bounds import lr_check, lr_velocity, norm_volume_check
from .errors import (
    ConfigurationError,
    ConvergenceError,
    GapClosedError,
    GridRefinementError,
    NumericalFailure,
    TwistStepError,
)
from .fock import FockSector
from .interaction import HamiltonianPath, Interaction, TimeDependentInteraction, assemble, build_tvw
from .lattice import DecayFunction, LocalizationPlane, TorusLattice
from .propagate import Schedule, adiabatic_errors, composite_evolutions, evolve
from .response import TwistedFamily, TwistGrid, chern_number, hall_experiment, response_series
from .spectral import SpectralData, eig_cluster, inverse_liouvillian, projection_derivative

__version__ = "0.1.0"

__all__ = [
    "AdiabaticFamily",
    "ConfigurationError",
    "ConvergenceError",
    "DecayFunction",
    "FockSector",
    "GapClosedError",
    "GridRefinementError",
    "HamiltonianPath",
    "Interaction",
    "LocalizationPlane",
    "NumericalFailure",
    "Schedule",
    "SpectralData",
    "TimeDependentInteraction",
    "TorusLattice",
    "TwistGrid",
    "TwistStepError",
    "TwistedFamily",
    "adiabatic_errors",
    "assemble",
    "build_tvw",
    "chern_number",
    "composite_evolutions",
    "defect",
    "eig_cluster",
    "evolve",
    "expansion_order2",
    "first_order_blocks",
    "hall_experiment",
    "inverse_liouvillian",
    "kato_generator",
    "lr_check",
    "lr_velocity",
    "norm_volume_check",
    "projection_derivative",
    "response_series",
]
