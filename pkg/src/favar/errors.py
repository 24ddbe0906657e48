"""Exception hierarchy shared by all modules."""


class FavarError(Exception):
    """Base class for every error raised by the package."""


class ShapeError(FavarError, ValueError):
    pass


class ParameterError(FavarError, ValueError):
    pass


class DataError(FavarError, ValueError):
    """Invalid or inconsistent input data (panel files, non-finite values)."""


class ConfigError(FavarError, ValueError):
    pass


class NumericalError(FavarError, ArithmeticError):
    """A factorization or covariance update failed numerically."""


class DegenerateInstrumentError(NumericalError):
    """The proxy impact on the policy indicator is exactly zero."""
