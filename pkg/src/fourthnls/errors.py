"""Exception types raised across the package."""


class FourthNLSError(Exception):
    """Base class for all package errors."""


class InvalidArgument(FourthNLSError, ValueError):
    """An argument violates a documented precondition."""


class BlowUpError(FourthNLSError, ArithmeticError):
    """Non-finite state or runaway mass growth during time stepping."""

    def __init__(self, message, last_good_time):
        super().__init__(f"{message} (last good time t={last_good_time:.6g})")
        self.last_good_time = last_good_time


class NoControlError(FourthNLSError):
    """The control operator is singular; no control can be synthesized."""


class AccuracyError(FourthNLSError):
    """A computed control misses its target by more than the tolerance."""

    def __init__(self, message, residual, diagnostics=None):
        super().__init__(f"{message} (residual={residual:.3e})")
        self.residual = residual
        self.diagnostics = diagnostics or {}


class NonConvergenceError(FourthNLSError):
    """Picard iteration diverged or ran out of iterations."""

    def __init__(self, message, history):
        super().__init__(message)
        self.history = list(history)


class NonlinearFailure(FourthNLSError):
    """The backward nonlinear solve inside the Picard map blew up."""


class StabilizationTimeout(FourthNLSError):
    """The damped phase did not reach the local-control ball in time."""

    def __init__(self, message, horizon, final_mass):
        super().__init__(message)
        self.horizon = horizon
        self.final_mass = final_mass


class UsageError(FourthNLSError):
    """Invalid experiment configuration."""

    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key


class NotFoundError(FourthNLSError, LookupError):
    """A requested data series is not present in a run record."""
