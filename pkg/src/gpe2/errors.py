"""Exception types raised across the package."""


class GPE2Error(Exception):
    """Base class for all package errors."""


class GridMismatchError(GPE2Error, ValueError):
    """Two fields that must share a grid do not."""


class ParameterError(GPE2Error, ValueError):
    """An argument is outside its admissible range."""


class MassConstraintError(GPE2Error, ValueError):
    """A field expected to carry unit mass does not."""


class NumericalFailure(GPE2Error, RuntimeError):
    """An inner iterative solve failed to converge."""


class DegenerateInputError(GPE2Error, ValueError):
    """Input makes the requested quantity undefined (e.g. zero denominator)."""


class DirectionUndefinedError(DegenerateInputError):
    """The moment vector used to fit a half-plane direction vanishes."""


class FormatError(GPE2Error, ValueError):
    """A field file is malformed."""
