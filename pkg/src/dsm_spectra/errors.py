"""Exception types shared across the library.

The CLI maps these onto process exit codes: ConfigError and its
subclasses exit with 4, IoError with 3, and every other
DsmSpectraError with 2 (a violated invariant, bound, or numeric
contract discovered while running).
"""


class DsmSpectraError(Exception):
    """Base class for all library errors."""


class ConfigError(DsmSpectraError):
    """Invalid configuration value, flag, or config-file entry."""


class NumericUnderflow(ConfigError):
    """Kernel entries underflowed to zero; the temperature is outside
    the supported range."""


class SnrTargetUnreachable(ConfigError):
    """No temperature on the pilot grid reaches the requested SNR
    regime."""


class InvalidEpsilon(ConfigError):
    """Epsilon outside (0, 1)."""


class InvalidDimension(ConfigError):
    """Dimension too small for the requested bound."""


class HighSnr(ConfigError):
    """SNR above 1/8; the low-SNR hypothesis of the collapse bound is
    violated, so the bound is not asserted."""


class IoError(DsmSpectraError):
    """File could not be read, parsed, or written."""


class InvariantViolation(DsmSpectraError):
    """A runtime contract that should hold for all valid inputs was
    observed to fail."""


class BoundViolation(InvariantViolation):
    """An empirical frequency exceeded a theoretical bound beyond the
    allowed sampling slack."""


class SpectralMismatch(InvariantViolation):
    """Restriction-norm and second-singular-value routes disagree; the
    input is not actually doubly stochastic."""


class NonFinite(DsmSpectraError):
    """Input contains NaN or Inf where finite values are required."""


class DimensionMismatch(DsmSpectraError):
    """Operand shapes are incompatible."""


class NotPositive(DsmSpectraError):
    """Input must be entrywise positive."""


class DegenerateInput(DsmSpectraError):
    """The detail component is (numerically) zero, so the requested
    map is undefined."""


class ZeroVector(DsmSpectraError):
    """A nonzero vector is required."""


class ZeroNoise(DsmSpectraError):
    """Noise scale is zero, so the SNR is undefined."""


class ResampleExhausted(DsmSpectraError):
    """Repeated resampling failed to produce a usable draw."""


class ZeroGap(DsmSpectraError):
    """Singular-value gap is numerically zero, so the perturbation
    bound is undefined."""
