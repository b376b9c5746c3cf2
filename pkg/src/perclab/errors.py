"""Exception hierarchy shared by every module."""


class PerclabError(Exception):
    """Base class for checked failures (CLI exit code 1)."""


class ParameterError(PerclabError, ValueError):
    pass


class AddressError(PerclabError, ValueError):
    pass


class ResourceError(PerclabError):
    pass


class PreconditionError(PerclabError, ValueError):
    pass


class UnsupportedFamilyError(PerclabError):
    pass


class NumericError(PerclabError, ArithmeticError):
    """Raised when an iterative method misses its tolerance or a numeric invariant breaks."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ConstructionError(PerclabError):
    pass


class ConfigError(PerclabError):
    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line
