"""Exception types shared across the package."""


class ChaoscastError(Exception):
    """Base class for all errors raised by this package."""


class LengthError(ChaoscastError, ValueError):
    """Input has too few observations for the requested operation."""


class DegeneracyError(ChaoscastError, ValueError):
    """Input is degenerate (zero variance, no divergence, identical losses)."""


class SingularityError(ChaoscastError, ValueError):
    """Unpenalized linear system is singular."""


class ShapeError(ChaoscastError, ValueError):
    """Array has the wrong shape or feature count."""


class DomainError(ChaoscastError, ValueError):
    """Value outside the mathematical domain (non-positive price, zero divisor)."""


class OrderingError(ChaoscastError, ValueError):
    """Timestamps out of order or duplicated."""


class SchemaError(ChaoscastError, ValueError):
    """Malformed file or record; carries the offending line number when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ProtocolError(ChaoscastError, ValueError):
    """Quote endpoint returned something the field mapping cannot digest."""
