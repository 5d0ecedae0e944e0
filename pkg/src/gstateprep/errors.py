"""Exception hierarchy."""


class GStatePrepError(Exception):
    """Base class for all package errors."""


class ResourceLimitError(GStatePrepError):
    """A register would exceed the configured qubit cap."""


class DimensionMismatchError(GStatePrepError, ValueError):
    pass


class DegenerateStateError(GStatePrepError):
    """Post-selection on a subspace that carries no probability."""


class ScenarioError(GStatePrepError, ValueError):
    """Scenario file could not be parsed or violates an admissibility condition."""


class ParameterError(GStatePrepError, ValueError):
    pass


class ScheduleError(GStatePrepError):
    """No usable Grover schedule could be built."""


class InfeasibleProfileError(GStatePrepError):
    """Requested step heights cannot be realized by a normalized state."""


class AuditFailure(GStatePrepError):
    """A hard analytic guarantee was violated by a run."""
