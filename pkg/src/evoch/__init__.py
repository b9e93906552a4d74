"""Cahn-Hilliard equations with logarithmic potential on evolving surfaces,
discretized by piecewise-linear surface finite elements."""

from .config import RunConfig, load_config, parse_config
from .errors import (
    ConfigurationError,
    DomainError,
    EvochError,
    GeometryError,
    PreconditionError,
    SolverError,
    StepError,
)
from .geometry import FlowField, advance_mesh, build_reference_surface
from .potential import PotentialParams
from .scenario import admissibility, run, run_scenario, verify

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError",
    "DomainError",
    "EvochError",
    "FlowField",
    "GeometryError",
    "PotentialParams",
    "PreconditionError",
    "RunConfig",
    "SolverError",
    "StepError",
    "admissibility",
    "advance_mesh",
    "build_reference_surface",
    "load_config",
    "parse_config",
    "run",
    "run_scenario",
    "verify",
]
