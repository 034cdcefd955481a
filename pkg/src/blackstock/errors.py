"""Exception hierarchy shared by the solver modules and the command line."""


class BlackstockError(Exception):
    """Base class for all errors raised by the package."""

    exit_code = 3


class ConfigError(BlackstockError):
    """Malformed scenario, unknown field, or inconsistent parameters."""

    exit_code = 1


class DomainError(ConfigError):
    """Bad geometry, mode count, or mismatched domains."""


class BoundaryConditionError(ConfigError):
    """An operation is undefined for the requested boundary condition."""


class ValidationError(BlackstockError):
    """Data fail a compatibility or mean constraint."""

    exit_code = 2

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class NumericalError(BlackstockError):
    """A numerical procedure failed to produce a trustworthy result."""

    exit_code = 3


class IllConditionedError(NumericalError):
    pass


class GuardViolationError(NumericalError):
    """The degeneracy factor ``1 + 2k u_t`` dropped below the guard."""

    def __init__(self, message, time=None, location=None, value=None):
        super().__init__(message)
        self.time = time
        self.location = location
        self.value = value


class DivergenceError(NumericalError):
    def __init__(self, message, iteration=None, history=None):
        super().__init__(message)
        self.iteration = iteration
        self.history = history or []


class ChannelUnderflowError(NumericalError):
    def __init__(self, message, suggested_window=None):
        super().__init__(message)
        self.suggested_window = suggested_window
