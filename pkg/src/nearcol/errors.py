"""Exception types shared by all modules."""


class NearcolError(Exception):
    """Base class for library errors."""


class DomainError(NearcolError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class PreconditionError(NearcolError, ValueError):
    """A bound was requested outside the regime in which it is proven."""


class ResourceError(NearcolError, RuntimeError):
    """An exact computation would exceed the configured work budget."""


class FormatError(NearcolError, ValueError):
    """Malformed template-database file or CLI input."""


class ConsistencyError(NearcolError, ValueError):
    """Over-specified inputs disagree with the identities linking them."""
