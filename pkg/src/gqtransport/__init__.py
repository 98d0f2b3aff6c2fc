"""Hybrid kinetic/drift-diffusion transport across graphene potential steps."""

from .core import PhysicalConfig, ScaledUnits, phi0, phi1, phi2, chemical_potential
from .device import BoundaryData, DeviceConfig, Mesh, compute_observables, solve_device
from .errors import (ConfigError, ConvergenceError, DegenerateStateError, DomainError,
                     GQTransportError, SolvabilityError, StructuralError)
from .interface import OrdinateGrid, apply_B, apply_K, dtc_first_order_residual, dtc_leading_residual
from .milne import CoupledMilneSolver, MilneGrid, solve_coupled, solve_halfspace
from .scattering import PotentialProfile, ScatteringTable, step_coefficients, validate_scattering

__version__ = "0.1.0"

__all__ = [
    "PhysicalConfig", "ScaledUnits", "phi0", "phi1", "phi2", "chemical_potential",
    "BoundaryData", "DeviceConfig", "Mesh", "compute_observables", "solve_device",
    "ConfigError", "ConvergenceError", "DegenerateStateError", "DomainError",
    "GQTransportError", "SolvabilityError", "StructuralError",
    "OrdinateGrid", "apply_B", "apply_K", "dtc_first_order_residual", "dtc_leading_residual",
    "CoupledMilneSolver", "MilneGrid", "solve_coupled", "solve_halfspace",
    "PotentialProfile", "ScatteringTable", "step_coefficients", "validate_scattering",
]
