"""Exception hierarchy.

Every error raised on purpose by the toolkit derives from :class:`HadidError`.
Errors that signal bad input data also derive from :class:`ValueError` so
callers that only care about "bad data" can catch that.
"""


class HadidError(Exception):
    """Base class for all toolkit errors."""


class DataError(HadidError, ValueError):
    """Input data violates a precondition."""


# audio_io
class MissingFile(HadidError, FileNotFoundError):
    pass


class UnsupportedFormat(DataError):
    pass


class CorruptHeader(DataError):
    pass


class EmptyAfterTrim(DataError):
    pass


# pitch
class BandTooNarrow(DataError):
    pass


class BufferTooShort(DataError):
    pass


class NonPositiveFrequency(DataError):
    pass


# segmentation / prosody
class InvalidBand(DataError):
    pass


class NoNuclei(DataError):
    pass


class TooFewSegments(DataError):
    def __init__(self, kind, needed, got):
        super().__init__(f"need at least {needed} {kind} segments, got {got}")
        self.kind = kind
        self.needed = needed
        self.got = got


class NoVoicedNucleus(DataError):
    pass


class UnusableUtterance(DataError):
    """An utterance could not be turned into a feature vector.

    ``reason`` is the class name of the underlying error, e.g. ``"NoNuclei"``.
    """

    def __init__(self, reason, detail=""):
        msg = reason if not detail else f"{reason}: {detail}"
        super().__init__(msg)
        self.reason = reason


# stats
class DegenerateInput(DataError):
    def __init__(self, message, feature=None):
        if feature is not None:
            message = f"{feature}: {message}"
        super().__init__(message)
        self.feature = feature


class EmptyGroup(DataError):
    pass


# neuralnet
class InvalidTopology(DataError):
    pass


class DimensionMismatch(DataError):
    pass


class InvalidTarget(DataError):
    pass


class SingleClassData(DataError):
    pass


class NonFiniteLoss(HadidError, ArithmeticError):
    def __init__(self, epoch):
        super().__init__(f"training diverged (non-finite loss) at epoch {epoch}")
        self.epoch = epoch


class ModelFormatError(DataError):
    """Serialized model is malformed or has an incompatible version."""


# hierarchy
class CycleDetected(DataError):
    pass


class DuplicateLabel(DataError):
    pass


class UnaryNode(DataError):
    pass


class UnknownLabel(DataError):
    pass


class EmptyDataset(DataError):
    pass


class UntrainedModel(HadidError):
    pass


# evaluation
class LengthMismatch(DataError):
    pass


class PathNotInTree(DataError):
    pass


class TooFewSpeakers(DataError):
    pass


class FoldError(HadidError):
    """Wraps an error raised while processing one cross-validation fold."""

    def __init__(self, fold, error):
        super().__init__(f"fold {fold}: {type(error).__name__}: {error}")
        self.fold = fold
        self.error = error


# corpus
class DuplicateUtteranceId(DataError):
    pass


class MissingColumn(DataError):
    pass


class UnknownDialect(DataError):
    pass


class IoError(HadidError, OSError):
    """An output directory or file could not be written."""
