"""Exception classes shared across the package."""


class WavQTLError(Exception):
    """Base class for all package errors."""


class InvalidInputError(WavQTLError, ValueError):
    pass


class DegenerateInputError(WavQTLError, ValueError):
    """Raised for inputs carrying no information, e.g. a constant vector."""


class NumericalDegeneracyError(WavQTLError, ArithmeticError):
    pass


class NoTestableVariantError(WavQTLError):
    """Every candidate variant was skipped (constant genotype)."""
