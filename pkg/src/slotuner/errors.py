"""Exception types shared across the package."""


class SlotunerError(Exception):
    """Base class for all package errors."""


class RangeError(SlotunerError, ValueError):
    """A coordinate fell outside its declared bounds."""


class ShapeError(SlotunerError, ValueError):
    """Mismatched dimensions or parameter-space layouts."""


class NumericError(SlotunerError, ArithmeticError):
    """Non-finite input or an irrecoverably ill-conditioned computation."""


class ConfigError(SlotunerError, ValueError):
    """Invalid scenario or component configuration."""


class ParseError(SlotunerError, ValueError):
    """Malformed input file."""


class StateError(SlotunerError, RuntimeError):
    """Operation requires state that is not present (e.g. empty history)."""


class ProposalError(SlotunerError, RuntimeError):
    """The acquisition optimizer failed to produce a usable candidate."""


class DomainError(SlotunerError, ValueError):
    """Value outside the mathematical domain of an operation."""
