"""Exception hierarchy shared by every module."""


class TLPortfolioError(Exception):
    """Base class for all package errors."""


class InputError(TLPortfolioError, ValueError):
    """Malformed data, files or configuration."""


class NumericalError(TLPortfolioError, ArithmeticError):
    """A computation could not be carried out (singular matrix, no convergence...)."""


class ZeroVarianceError(NumericalError):
    """Sample variance is zero, so a Sharpe ratio is undefined."""
