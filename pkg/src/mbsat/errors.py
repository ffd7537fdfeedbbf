"""Exception hierarchy shared by all modules."""


class MbsatError(Exception):
    """Base class for toolkit errors."""


class InvalidParameterError(MbsatError, ValueError):
    """An argument is outside the supported domain."""


class InvalidProfileError(InvalidParameterError):
    """An interference profile violates the gain-ordering assumptions."""


class EstimationError(MbsatError, RuntimeError):
    """A Monte Carlo estimate produced NaN or otherwise failed."""


class NotFoundError(MbsatError, RuntimeError):
    """A search (cutoff SNR, threshold, design) found no solution in range."""


class ConstructionError(MbsatError, RuntimeError):
    """A code could not be built or preprocessed for encoding."""


class ConvergenceError(MbsatError, RuntimeError):
    """A fixed-point iteration did not settle within its cap."""


class ConfigError(MbsatError, ValueError):
    """An experiment configuration failed validation."""
