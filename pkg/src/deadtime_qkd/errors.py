"""Exception types shared across the package."""


class ParameterError(ValueError):
    """A link parameter or configuration value violates its domain."""


class SizeCapError(ValueError):
    """A requested state space or path tree exceeds the configured cap."""


class ConvergenceError(RuntimeError):
    """An iterative solver did not reach its tolerance."""


class BoundaryMaximumError(RuntimeError):
    """An optimum search found its maximum on the scan boundary."""
