"""Exception hierarchy.

Every error raised on purpose by the package derives from :class:`BlackspotError`
so the CLI can map it onto an exit code without catching unrelated bugs.
"""


class BlackspotError(Exception):
    """Base class for all package errors."""


class ParameterError(BlackspotError, ValueError):
    """An argument is outside its valid domain."""


class ShapeError(BlackspotError, ValueError):
    """Array dimensions do not line up."""


class SchemaError(BlackspotError):
    """The dataset header or schema file is inconsistent."""

    def __init__(self, message, column=None):
        super().__init__(message)
        self.column = column


class RowError(BlackspotError):
    """One or more data rows violate the schema.

    ``errors`` holds ``(row_index, column, value, reason)`` tuples with 0-based
    record indices (the header is not counted).
    """

    def __init__(self, errors):
        self.errors = list(errors)
        row, column, value, reason = self.errors[0]
        more = f" (+{len(self.errors) - 1} more)" if len(self.errors) > 1 else ""
        super().__init__(f"row {row}, column {column!r}: {reason} (value {value!r}){more}")
        self.row = row
        self.column = column
        self.value = value


class EmptyInputError(BlackspotError, ValueError):
    """An operation that needs at least one sample received none."""


class StratificationError(BlackspotError, ValueError):
    """A class has fewer members than the requested number of folds."""


class AmbiguityError(BlackspotError, ValueError):
    """A one-hot block carries no active column."""


class AugmentationError(BlackspotError, ValueError):
    """MixUp could not draw a valid pair."""


class FitError(BlackspotError):
    """A model could not be fitted to the given data."""


class TrainingError(FitError):
    """Gradient training diverged."""

    def __init__(self, message, epoch):
        super().__init__(f"{message} (epoch {epoch})")
        self.epoch = epoch


class ConvergenceError(FitError):
    """An iterative solver hit its iteration limit."""

    def __init__(self, message, grad_norm):
        super().__init__(f"{message} (final gradient norm {grad_norm:.3e})")
        self.grad_norm = grad_norm


class NumericalError(FitError):
    """A linear system stayed indefinite after jitter escalation."""


class ArtifactError(BlackspotError):
    """Base for container read/write failures."""


class VersionError(ArtifactError):
    def __init__(self, found, supported):
        super().__init__(f"file format version {found} is newer than supported version {supported}")
        self.found = found
        self.supported = supported


class TruncatedArtifactError(ArtifactError):
    pass


class CorruptArtifactError(ArtifactError):
    pass


class FingerprintError(ArtifactError):
    pass


class StageError(FitError):
    """A stage of the proposed pipeline failed; ``stage`` names it."""

    def __init__(self, stage, cause):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause
