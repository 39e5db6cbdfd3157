"""Exception hierarchy shared across the package."""


class RetrievalError(Exception):
    """Base class for every error raised by incretrieval."""


class ConfigError(RetrievalError, ValueError):
    pass


class DomainError(RetrievalError, ValueError):
    """An iterated logarithm was requested outside its domain."""


class RangeError(RetrievalError, ValueError):
    """A key or fingerprint lies outside the range it is declared in."""


class ChainError(RetrievalError):
    """A reducer chain is shorter than the requested stage."""


class SearchExhausted(RetrievalError):
    """No injective reducer was found within the trial budget."""

    def __init__(self, size, domain, budget):
        super().__init__(f"no injective reducer for {size} fingerprints into [{domain}] "
                         f"within {budget} trials")
        self.size = size
        self.domain = domain
        self.budget = budget


class InjectivityViolation(RetrievalError):
    """A reducer entry did not map a bucket injectively (programming error)."""


class StoreFull(RetrievalError):
    pass


class DuplicateKey(RetrievalError, KeyError):
    pass


class CapacityExceeded(RetrievalError):
    pass


class DegenerateGrid(RetrievalError, ValueError):
    pass


class SnapshotError(RetrievalError, ValueError):
    """A serialized snapshot is malformed or of an unknown version."""
