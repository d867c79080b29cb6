"""Exception types shared across the package."""


class NhlabError(Exception):
    """Base class for all package-specific errors."""


class StructuralError(NhlabError, ValueError):
    """Mismatched shapes, flavors, or missing evaluators in problem data."""


class MissingDataError(StructuralError):
    """An operation needs data (e.g. second-order jets) the input lacks."""


class ParameterError(NhlabError, ValueError):
    """A model or integration parameter is out of its admissible range."""


class SingularConstraintError(NhlabError, RuntimeError):
    """The constraint velocity-gradient lost rank, so multipliers are
    undetermined.  ``partial`` holds the trajectory computed so far when
    raised from a simulation loop."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class BlowUpError(NhlabError, RuntimeError):
    """Non-finite values appeared during explicit time stepping."""

    def __init__(self, message, step_index=None):
        super().__init__(message)
        self.step_index = step_index


class InsufficientDataError(NhlabError, ValueError):
    """Too few samples or snapshots for the requested stencil/solve."""


class SamplingError(NhlabError, RuntimeError):
    """Constraint-manifold sampling lost too many points to projection
    failures."""


class ConfigError(NhlabError, ValueError):
    """A scenario configuration is malformed."""
