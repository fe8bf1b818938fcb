"""Exception hierarchy shared by every stage of the toolkit.

``DomainError`` subclasses describe problems with the data or the
configuration (an empty band, an empty split); the command line maps them to
exit code 1.  Everything else that is raised on purpose derives from
``ExtremeLossError``.
"""


class ExtremeLossError(Exception):
    """Base class for all errors raised by extremeloss."""


class DomainError(ExtremeLossError):
    """The data or configuration cannot support the requested computation."""


class ConfigError(ExtremeLossError, ValueError):
    """Invalid or unknown configuration value."""


class NonFiniteError(ExtremeLossError, ValueError):
    """A NaN or infinite value reached a computation that forbids it."""


class LengthMismatch(ExtremeLossError, ValueError):
    pass


class EmptyBandError(DomainError):
    """An extreme band has no samples, so its weight is undefined."""

    def __init__(self, band, message=None):
        self.band = band
        super().__init__(message or f"no training samples in the {band.name} band")


class EmptySplitError(DomainError):
    def __init__(self, side, message=None):
        self.side = side
        super().__init__(message or f"the {side} split is empty")


class EmptyDatasetError(DomainError):
    pass


class TrainingError(ExtremeLossError):
    """Training diverged or violated one of its runtime checks."""


class ModelFormatError(ExtremeLossError):
    """A serialized model is truncated, corrupted or of the wrong kind."""


class VersionError(ModelFormatError):
    pass


class ParseError(ExtremeLossError, ValueError):
    """One malformed CSV row."""

    def __init__(self, line, message):
        self.line = line
        super().__init__(f"line {line}: {message}")
