"""Exception types shared across the package.

Every error raised on purpose derives from ResidLabError so callers (and the
CLI) can separate our diagnostics from genuine bugs.  The split between
ConfigError and NumericError mirrors the CLI exit codes: 2 for problems with
the scenario file itself, 3 for content that parses but fails validation or
numerics that break down.
"""


class ResidLabError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(ResidLabError):
    """Scenario file cannot be read or does not match the schema."""


class ParseError(ConfigError):
    """Scenario file is not valid JSON; message carries line/column."""


class SchemaError(ConfigError):
    """Unknown, missing, or wrongly typed key; message carries the key path."""


class UnknownCase(ConfigError):
    """Reproduction case id is not one of the published cases."""


class NumericError(ResidLabError):
    """Inputs parsed fine but fail validation or a numeric procedure."""


class ValidationError(NumericError):
    """Scenario content is structurally valid but semantically wrong."""


class DimensionMismatch(NumericError):
    """Matrix dimensions are inconsistent with the declared loop shape."""


class UnstableClosedLoop(NumericError):
    """A+BK or A-LC has an eigenvalue with nonnegative real part."""


class NonPSDNoise(NumericError):
    """Noise covariance is not symmetric positive semidefinite."""


class NonPSD(NumericError):
    """Matrix expected to be symmetric PSD is not (beyond tolerance)."""


class NonPositiveStep(NumericError):
    """Sampling step must be strictly positive."""


class SingularResidualCovariance(NumericError):
    """Residual covariance is not invertible to tolerance."""


class NotHurwitz(NumericError):
    """Continuous-time matrix has an eigenvalue with nonnegative real part."""


class NotSchur(NumericError):
    """Discrete-time matrix has spectral radius >= 1."""


class NumericallySingular(NumericError):
    """A linear solve failed or is too ill-conditioned to trust."""


class WrongPlantClass(NumericError):
    """Plant is not in the second-order canonical form the observer needs."""


class DomainError(NumericError):
    """Scalar argument outside the mathematical domain of the function."""


class TraceTooShort(NumericError):
    """Trace does not cover the window the computation needs."""


class ZeroPlantParameter(NumericError):
    """Plant parameter that must be nonzero is zero."""


class MissingAttackerKnowledge(NumericError):
    """Stealthy attack lacks a quantity it is declared to know."""


class HorizonZero(NumericError):
    """Simulation horizon must be at least one step."""
