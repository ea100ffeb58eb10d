"""Exception taxonomy shared across the package.

Each error family maps to a distinct CLI exit code so scripted pipelines can
tell apart malformed files, broken references, dimension mismatches and
training failures without parsing messages.
"""


class VistrError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class FileMissingError(VistrError):
    """A referenced input path does not exist or cannot be opened."""

    exit_code = 10


class FormatError(VistrError):
    """Bad magic, unsupported version, or a syntactically invalid record."""

    exit_code = 3


class IntegrityError(VistrError):
    """Dangling identifier or inconsistent cross-reference inside a file."""

    exit_code = 4


class ShapeError(VistrError):
    """Dimension mismatch between arrays, model and data."""

    exit_code = 5


class DataError(VistrError):
    """Non-finite or otherwise out-of-domain numeric value."""

    exit_code = 6


class TrainingDivergedError(VistrError):
    """Training produced a non-finite loss; carries the last good state."""

    exit_code = 7

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration


class ConfigError(VistrError):
    """Unknown key or invalid value in a run-configuration file."""

    exit_code = 2


class DegenerateGeometryError(VistrError):
    """Geometric input admits no solution (collinear points, zero extent)."""

    exit_code = 6


class InsufficientMatchesError(VistrError):
    """Fewer correspondences than the robust estimator's minimum."""

    exit_code = 1


class NoSubmapError(VistrError):
    """Matching was asked to run against an empty submap."""

    exit_code = 1


class UndefinedMetricError(VistrError):
    """A metric was requested over an empty or invalid population."""

    exit_code = 1
