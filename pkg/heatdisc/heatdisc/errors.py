"""Exceptions raised by heatdisc."""


class HeatDiscError(Exception):
    """Base class for every error raised by the package."""


class ContractViolation(HeatDiscError):
    """A caller broke the pre-condition of an operation."""


class InfeasibleGeometryError(HeatDiscError):
    """No disc with the requested radius fits strictly inside the square."""


class MeshError(HeatDiscError):
    """The fitted mesh could not be built or is inconsistent."""


class SolverError(HeatDiscError):
    """A linear solve failed during time stepping."""

    def __init__(self, message, step=None):
        if step is not None:
            message = f"{message} (time step {step})"
        super().__init__(message)
        self.step = step


class ConfigError(HeatDiscError):
    """The run configuration is malformed."""


class VerificationFailure(HeatDiscError):
    """The adjoint gradient disagrees with the finite-difference oracle."""
