"""Exception types shared by all modules.

Each error belongs to one of three families that the command line maps to
exit codes: validation (2), I/O (3) and numeric/contract (4).
"""


class FransonError(Exception):
    """Base class for every error raised by this package."""

    exit_code = 4


# validation family


class ValidationError(FransonError, ValueError):
    exit_code = 2


class DomainError(ValidationError):
    """An input lies outside the domain of an operation."""


class PresetError(ValidationError, LookupError):
    """Unknown preset name."""


class ConfigError(ValidationError):
    """Bad or inconsistent configuration."""


class ParseError(ValidationError):
    """Malformed line in a text file. ``lineno`` is 1-based."""

    def __init__(self, message, lineno=None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class FormatError(ValidationError):
    """File format or version mismatch."""


# numeric / contract family


class ContractError(FransonError):
    """A precondition on the kind or state of an object was violated."""


class ResolutionError(ContractError):
    """Grid too coarse for the requested evaluation."""


class RangeError(FransonError):
    """A result falls outside the representable or meaningful range."""


class ResourceError(FransonError):
    """Request would need too much memory or time."""
