"""Exception hierarchy shared by all modules.

Each class carries the CLI exit code it maps to.
"""


class ErheoError(Exception):
    exit_code = 4


class ConfigError(ErheoError, ValueError):
    """Bad parameters, inconsistent data, or a singular setup."""

    exit_code = 2


class InvalidInputError(ErheoError, ValueError):
    exit_code = 2


class DomainError(ErheoError, ValueError):
    """A pointwise formula was evaluated outside its domain."""

    exit_code = 2


class MeshError(ErheoError, ValueError):
    exit_code = 2


class ClosureError(ErheoError, RuntimeError):
    """A material closure failed at a given sample location."""

    exit_code = 2

    def __init__(self, message, location=None):
        super().__init__(message)
        self.location = location


class NonConvergenceError(ErheoError, RuntimeError):
    """Iteration cap reached; ``history`` holds the residual trail."""

    exit_code = 3

    def __init__(self, message, history=None, hint=None):
        super().__init__(message)
        self.history = list(history or [])
        self.hint = hint


class UnstablePairError(ErheoError, RuntimeError):
    exit_code = 4


class InternalError(ErheoError, RuntimeError):
    exit_code = 4
