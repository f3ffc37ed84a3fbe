"""Exception hierarchy shared across the harness."""


class ProbeError(Exception):
    """Base class for all domain errors raised by this package."""


class UnsegmentableInput(ProbeError):
    """Word segmentation was requested for unspaced text without a lexicon."""


class IndexOutOfRange(ProbeError):
    """A deletion index is at or past the unit count of the text."""


class EmptyReference(ProbeError):
    """BLEU was asked to score against an empty reference."""


class EmptyInput(ProbeError):
    """An aggregate was asked to summarize an empty collection."""


class EmptyCorpus(ProbeError):
    """The pipeline was started on an empty corpus."""


class BackendUnavailable(ProbeError):
    """A translation backend process or endpoint failed."""


class ProtocolViolation(ProbeError):
    """A backend broke the line-oriented wire protocol (count mismatch)."""


class MissingTranslation(ProbeError):
    """A precomputed translation file has no entry for a source."""


class CacheCorrupt(ProbeError):
    """The translation cache file has a bad magic header or version."""


class SentenceTooShort(ProbeError):
    """A sentence has too few units for the requested deletion count."""


class UnknownCandidate(ProbeError):
    """An annotation references a candidate id absent from the run."""


class ForeignAnnotation(ProbeError):
    """A report was given annotations for candidates of another run."""


class StoreLocked(ProbeError):
    """Another writer already holds the annotation log."""


class AddressInUse(ProbeError):
    """The requested service address is already bound."""


class ConfigError(ProbeError):
    """The run configuration is malformed or internally inconsistent."""


class StageFailure(ProbeError):
    """A pipeline stage failed; wraps the underlying error with stage context."""

    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        super().__init__(f"{stage}: {type(cause).__name__}: {cause}")
