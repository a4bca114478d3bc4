"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes: validation-type failures
(ParseError, ValidationError, DomainError, StateError, DegenerateInputError)
exit 1, ResourceError exits 2.
"""


class DeltaseqError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(DeltaseqError):
    """Malformed input file; the message names the offending line."""


class ValidationError(DeltaseqError):
    """Arguments or data violate a documented precondition."""


class DomainError(DeltaseqError):
    """A value lies outside the mathematical domain of an operation."""


class StateError(DeltaseqError):
    """Operation applied to an object in the wrong state."""


class DegenerateInputError(DeltaseqError):
    """Input is degenerate for the requested statistic (e.g. zero variance)."""


class ResourceError(DeltaseqError):
    """A configured work or size budget was exceeded."""
