"""Exception taxonomy shared across the package.

Every error carries a short machine-parsable ``category`` used by the CLI
for exit codes and stderr reporting.
"""


class FreqGuideError(Exception):
    category = "error"


class ShapeError(FreqGuideError):
    """Dimension or size constraint violated."""

    category = "shape"


class FormatError(FreqGuideError):
    """Malformed binary tensor file or CSV request."""

    category = "format"


class UsageError(FreqGuideError):
    """Invalid argument combination or empty input."""

    category = "usage"


class ConfigError(FreqGuideError):
    """Config file cannot be parsed or validated."""

    category = "config"


class DomainError(FreqGuideError):
    """Numeric parameter outside its mathematical domain."""

    category = "domain"
