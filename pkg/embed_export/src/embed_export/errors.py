"""Error taxonomy shared by the manifest parser, exporter, and CLI."""


class ExportToolError(Exception):
    """Base class; ``exit_code`` is what the CLI returns for this failure."""

    exit_code = 1


class ManifestError(ExportToolError):
    """Malformed or inconsistent manifest (syntax, duplicate ids, bad dims)."""

    exit_code = 2


class FileMissingError(ExportToolError):
    """A referenced file (manifest, weights) does not exist."""

    exit_code = 10


class ExportError(ExportToolError):
    """The export produced no records, e.g. every image was unreadable."""

    exit_code = 1
