"""Exception hierarchy. The CLI maps these onto process exit codes:
config errors -> 2, input/format errors -> 3, statistical degeneracies -> 4.
"""


class HftpError(Exception):
    """Base class for all package errors."""


class ConfigError(HftpError):
    """Bad run configuration (unknown keys, invalid parameter values)."""

    exit_code = 2


class InputError(HftpError):
    """Problems with input data or files."""

    exit_code = 3


class FormatError(InputError):
    """Malformed file header or metadata."""


class CorruptionError(FormatError):
    """Header and payload disagree (truncated or oversized payload)."""


class ValidationError(InputError):
    """Structurally valid input that violates a documented invariant."""


class BoundsError(ValidationError):
    """Requested window or index exceeds the data extent."""


class FrequencyGridError(ValidationError):
    """Requested frequency does not sit on the spectrum's bin grid."""


class GridTooCoarseError(ValidationError):
    """No neighboring bins exist inside the comparison band."""


class IncompleteDesignError(ValidationError):
    """A required experimental condition is missing."""


class DegeneracyError(HftpError):
    """Statistic undefined for this data (zero variance, empty margin...)."""

    exit_code = 4


class DegeneratePopulationError(DegeneracyError):
    """Population too small or has zero variance for z-scoring."""


class DegenerateFeatureError(DegeneracyError):
    """Feature vector with zero norm; cosine distance undefined."""


class UndefinedTestError(DegeneracyError):
    """Contingency table with a zero margin; chi-square undefined."""


class UndefinedRatioError(DegeneracyError):
    """Contribution ratio over a region with no channels."""
