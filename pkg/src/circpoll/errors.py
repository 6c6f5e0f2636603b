"""Exception hierarchy shared by the analytic, simulation and CLI layers."""


class CircPollError(Exception):
    """Base class for all package errors."""


class InvalidParameter(CircPollError, ValueError):
    pass


class DegenerateDistribution(CircPollError, ValueError):
    """Zero-truncation left no probability mass."""


class DomainError(CircPollError, ValueError):
    pass


class UnstableSystem(CircPollError):
    """Raised by steady-state operations when rho >= 1."""

    def __init__(self, rho: float, message: str | None = None):
        self.rho = rho
        super().__init__(message or f"system is unstable: rho = {rho:.9g} >= 1")


class WrongDistribution(CircPollError, ValueError):
    pass


class QuadratureFailure(CircPollError, ArithmeticError):
    pass


class InvalidConfig(CircPollError, ValueError):
    pass


class SimDegenerate(CircPollError):
    """The event loop cannot make progress (e.g. zero service and travel)."""


class MissingGridPoint(CircPollError, KeyError):
    pass


class TooFewReplications(CircPollError, ValueError):
    pass


class ZeroElapsed(CircPollError, ValueError):
    pass
