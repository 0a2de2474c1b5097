"""Exception types shared across the package."""


class ContrastLabError(Exception):
    """Base class for all package errors."""


class ShapeMismatchError(ContrastLabError):
    """Operands have incompatible shapes."""


class InvalidArgumentError(ContrastLabError):
    """An argument is outside its valid range."""


class DegenerateInputError(ContrastLabError):
    """Input is degenerate for the requested operation (e.g. zero-norm vector)."""


class NoGraphError(ContrastLabError):
    """backward() called on a tensor with no recorded computation."""


class UninitializedGradientError(ContrastLabError):
    """Optimizer step requested before gradients were populated."""


class DeterminismError(ContrastLabError):
    """A function expected to be deterministic returned differing values."""


class VocabularyError(ContrastLabError):
    """Token id outside the configured vocabulary."""


class PatchingError(ContrastLabError):
    """Pixel or spectrogram layout does not match the configured grid."""


class SequenceLengthError(ContrastLabError):
    """Sequence longer than the configured maximum."""


class EmptyDenominatorError(ContrastLabError):
    """Label-aware contrastive loss has no cross-class pair in the batch."""


class UndefinedCorrelationError(ContrastLabError):
    """Rank correlation undefined (an input has zero rank variance)."""


class NumericalAbortError(ContrastLabError):
    """Training aborted on a non-finite loss; message carries diagnostics."""


class FormatVersionError(ContrastLabError):
    """Serialized file has an unknown or unsupported format version."""


class ConfigError(ContrastLabError):
    """Configuration file or override is invalid."""
