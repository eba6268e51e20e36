"""Exception hierarchy shared by every module.

Each class maps to one CLI exit code (see ``cli.EXIT_CODES``).
"""


class LPPError(Exception):
    """Base class for all package errors."""


class ParameterError(LPPError, ValueError):
    """Invalid parameter: bad grid, mesh violation, unknown config key, ..."""


class ValidationError(ParameterError):
    """A path or tuple violates its structural invariants."""


class DomainError(ParameterError, IndexError):
    """Line or grid index outside the environment window."""


class SizeError(ParameterError):
    """Instance too large for an exhaustive routine."""


class InfeasibleError(LPPError, ValueError):
    """No path system exists for the requested endpoints."""


class StatisticsError(LPPError):
    """Not enough samples, or an estimate cannot be formed."""
