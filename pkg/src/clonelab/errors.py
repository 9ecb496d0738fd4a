"""Exception hierarchy shared by all lab modules."""


class LabError(Exception):
    """Base class for every error raised by clonelab."""


class DomainError(LabError, ValueError):
    """An input lies outside the domain of an operation."""


class IntegrationError(LabError, RuntimeError):
    """The implicit midpoint equation could not be solved."""

    def __init__(self, message, residual=float("nan")):
        super().__init__(f"{message} (residual={residual:.3e})")
        self.residual = residual


class ConstructionError(LabError, RuntimeError):
    """A constructive step (frame completion, matrix factorisation) failed."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report or {}


class ResolutionError(LabError, RuntimeError):
    """A sampled loop is too coarse to resolve its angular winding."""


class ConsistencyError(LabError, RuntimeError):
    """An integer invariant came out with a non-integral residual."""


class PlanningError(LabError, RuntimeError):
    """No collision-free transport path could be found."""


class ExecutionError(LabError, RuntimeError):
    """An executed transport plan failed its verification."""


class ConfigError(LabError, ValueError):
    """The lab configuration failed validation."""
