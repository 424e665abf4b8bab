"""Exception hierarchy shared by the library and the command-line tasks.
"""


class VfcError(Exception):
    """Base class for all vfcorpus errors."""


class DataError(VfcError):
    """Input data could not be processed (exit code 1)."""


class ConfigurationError(VfcError):
    """Invalid configuration (exit code 2)."""


class UnsupportedLanguageError(VfcError):
    """No grammar is registered for the requested language.

    This is a capability error: callers fall back to the raw diff.
    """

    def __init__(self, language):
        super(UnsupportedLanguageError, self).__init__('No grammar registered for language "%s"' % language)
        self.language = language


class DiffParseError(DataError):
    """Malformed unified diff input."""

    def __init__(self, message: str, lineno: int):
        super(DiffParseError, self).__init__('line %d: %s' % (lineno, message))
        self.lineno = lineno


class DiffRenderError(DataError):
    """A diff model violates the hunk invariants and cannot be rendered."""


class PatchApplyError(DataError):
    """A file diff does not apply to the given source."""


class SchemaError(DataError):
    """A record does not match the record file schema."""


class SplitError(DataError):
    """A split strategy cannot be applied to the given records."""


class EnrichmentError(DataError):
    """A commit cannot be enriched at all (its diff is unparseable)."""


class MetricError(DataError, ValueError):
    """Predictions do not satisfy a metric's preconditions."""


class DiscretePredictionsError(MetricError):
    """PD-S requested for discrete (0/1) predictions without usable scores."""


class InvalidDistributionError(DataError, ValueError):
    """Arguments are not probability distributions over a shared support."""
