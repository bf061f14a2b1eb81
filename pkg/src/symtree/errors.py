"""Exception types raised by the library."""


class SymTreeError(Exception):
    """Base class for all library errors."""


class InvalidArgumentError(SymTreeError, ValueError):
    """An argument has the wrong shape or an out-of-range value."""


class InvalidDimensionError(InvalidArgumentError):
    """A dimension was zero, negative, or did not match the data."""


class InvalidTermError(InvalidArgumentError):
    """A term was built with an exponent outside the supported range."""


class EmptyDataError(SymTreeError, ValueError):
    """A dataset with no rows was passed where samples are required."""


class IndeterminateTermError(SymTreeError, ArithmeticError):
    """A term evaluates to a non-finite value somewhere on the data."""
