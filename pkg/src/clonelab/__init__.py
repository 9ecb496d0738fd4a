"""Numerical laboratory for cloning questions in classical phase spaces."""

from .errors import (ConfigError, ConsistencyError, ConstructionError, DomainError, ExecutionError,
                     IntegrationError, LabError, PlanningError, ResolutionError)
from .phase_space import Factor, PhaseSpace, cylinder, euclidean, torus2

__all__ = [
    "ConfigError", "ConsistencyError", "ConstructionError", "DomainError", "ExecutionError",
    "IntegrationError", "LabError", "PlanningError", "ResolutionError",
    "Factor", "PhaseSpace", "cylinder", "euclidean", "torus2",
]

__version__ = "0.1.0"
