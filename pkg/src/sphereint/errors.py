"""Exception types shared across the package."""


class SimulationError(Exception):
    """Base class for runtime numerical failures."""


class SingularityError(SimulationError):
    """A state came within the guard band of a coordinate pole."""


class DomainError(SimulationError):
    """An evaluation left the domain of the pair interaction."""


class ConvergenceError(SimulationError):
    """An iterative solver failed to reach its tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class StiffnessError(SimulationError):
    """The adaptive step size collapsed below the representable floor."""


class StructureError(SimulationError):
    """A declared kinetic hierarchy is not actually hierarchical."""


class CalibrationError(SimulationError):
    """The benchmark reduction constants could not be established."""


class ConfigError(Exception):
    """A scenario description is malformed or inconsistent."""
