"""Exception types shared across the package."""


class CryptoCAEError(Exception):
    """Base class for all package errors."""


class ParseError(CryptoCAEError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DataError(CryptoCAEError, ValueError):
    pass


class InsufficientDataError(DataError):
    pass


class EmptyUniverseError(DataError):
    pass


class ShapeError(CryptoCAEError, ValueError):
    pass


class ConfigurationError(CryptoCAEError, ValueError):
    pass


class UndefinedStatisticError(CryptoCAEError, ValueError):
    """Raised when a statistic is undefined, e.g. for zero-variance input."""


class DivergenceError(CryptoCAEError, FloatingPointError):
    pass


class FetchError(CryptoCAEError, RuntimeError):
    pass
