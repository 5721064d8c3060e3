"""Exception types raised across the package.

ValueError is used for plain bad arguments (empty word, id out of range);
the classes here mark failures a caller may want to dispatch on, e.g. the
CLI maps them to exit code 2.
"""


class TokgraftError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(TokgraftError):
    """Unknown pretokenizer scheme or other bad configuration."""


class ParseError(TokgraftError):
    """Model file is not valid JSON; message carries the location."""


class SchemaError(TokgraftError):
    """Model file parsed but does not match the expected layout."""


class CompletenessError(TokgraftError):
    """A single-byte token is missing from the vocabulary."""


class IntegrityError(TokgraftError):
    """Vocabulary/merge cross-references are inconsistent."""


class CapacityError(TokgraftError):
    """A transplant asked for more swaps than the model can support."""


class EmptyCorpusError(TokgraftError):
    """A corpus yielded zero words where at least one is required."""
