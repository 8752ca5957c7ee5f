"""Exception types shared across the package."""


class SeqDetectError(Exception):
    """Base class for all errors raised by seqdetect."""


class DomainError(SeqDetectError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ConfigError(SeqDetectError, ValueError):
    """An object or configuration file is internally inconsistent."""


class CapacityError(SeqDetectError, ValueError):
    """A request exceeds an implementation limit (subset enumeration cap)."""
