"""Exception hierarchy shared by every module of the package."""


class InstrumentForgeError(Exception):
    """Base class for all errors raised by instrument_forge."""


class DimensionMismatch(InstrumentForgeError, ValueError):
    pass


class NonUnitaryBasisChange(InstrumentForgeError, ValueError):
    pass


class NotUnital(InstrumentForgeError, ValueError):
    pass


class RangeViolation(InstrumentForgeError, ValueError):
    pass


class UnknownLabel(InstrumentForgeError, KeyError):
    pass


class AlgebraMismatch(InstrumentForgeError, ValueError):
    pass


class OutcomeMismatch(InstrumentForgeError, ValueError):
    pass


class NotCP(InstrumentForgeError, ValueError):
    pass


class NotFullAlgebra(InstrumentForgeError, ValueError):
    """Raised when an operation needs an instrument on the full matrix algebra."""


class CapExceeded(InstrumentForgeError, ValueError):
    pass


class RegionOutOfRange(InstrumentForgeError, ValueError):
    pass


class RegionOrderViolation(InstrumentForgeError, ValueError):
    pass


class NotHermitian(InstrumentForgeError, ValueError):
    pass


class DegenerateAmplitude(InstrumentForgeError, ValueError):
    pass


class ParseError(InstrumentForgeError, ValueError):
    """Malformed JSON input. ``location`` names the line or field at fault."""

    def __init__(self, message, location=None):
        self.location = location
        if location is not None:
            message = f"{message} (at {location})"
        super().__init__(message)
