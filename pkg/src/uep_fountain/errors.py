"""Exception hierarchy. CLI exit codes hang off these classes."""


class UEPFountainError(Exception):
    exit_code = 1


class ConfigError(UEPFountainError, ValueError):
    exit_code = 2


class ParseError(UEPFountainError, ValueError):
    exit_code = 3


class StructuralError(UEPFountainError, ValueError):
    exit_code = 3


class InfeasibleError(UEPFountainError):
    """Raised when a design target lies outside what the parameters can reach.

    ``interval`` carries the achievable (low, high) range when known.
    """

    exit_code = 4

    def __init__(self, message, interval=None):
        super().__init__(message)
        self.interval = interval
