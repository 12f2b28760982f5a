"""Exception types raised across the package."""


class AutocurriculumError(Exception):
    """Base class for all package errors."""


class ConfigError(AutocurriculumError, ValueError):
    """Invalid or unknown configuration values."""


class DimensionError(AutocurriculumError, ValueError):
    """A policy, matrix or parameter vector has the wrong shape."""


class NonFiniteError(AutocurriculumError, FloatingPointError):
    """A NaN or infinity appeared where a finite value is required."""


class UnsupportedGameError(AutocurriculumError, TypeError):
    """The requested operation is not defined for this game kind."""


class SimplexError(AutocurriculumError, ValueError):
    """A meta-distribution is not a probability vector."""


class StationarityError(AutocurriculumError, RuntimeError):
    """An inner best-response loop did not reach the gradient-norm threshold."""


class IllConditionedError(AutocurriculumError, RuntimeError):
    """The regularised best-response Hessian is numerically singular."""


class GradientExplosionError(AutocurriculumError, FloatingPointError):
    """A meta-gradient exceeded the hard ceiling."""


class CheckpointError(AutocurriculumError, ValueError):
    """A checkpoint file is truncated, malformed or of another format version."""


class PayoffFileError(AutocurriculumError, ValueError):
    """A payoff-matrix CSV file could not be parsed."""
