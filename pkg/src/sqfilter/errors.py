"""Exception hierarchy shared by all sqfilter modules."""


class SqfilterError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(SqfilterError, ValueError):
    """Input violates a stated invariant (positivity, Bogoliubov identities, ...)."""


class DomainError(SqfilterError, ValueError):
    """Parameters are valid but outside the domain of a particular construction."""


class SingularParametrizationError(DomainError):
    """A closed-form parametrization hits a zero denominator."""


class DegeneratePhaseError(SqfilterError, ValueError):
    """Every quadrature phase is admissible; the caller must choose one."""


class SingularTransferError(SqfilterError, ArithmeticError):
    """The matrix mapping vacuum increments to quadratures is (near) singular."""

    def __init__(self, message, det):
        super().__init__(message)
        self.det = det


class StepFailure(SqfilterError, RuntimeError):
    """A stochastic integration step produced a non-state (e.g. trace collapse)."""

    def __init__(self, message, time=None, trajectory=None):
        super().__init__(message)
        self.time = time
        self.trajectory = trajectory


class ConfigError(SqfilterError, ValueError):
    """A run configuration could not be parsed."""


class NearMaximalWarning(UserWarning):
    """A closed form is evaluated close to maximal squeezing and loses accuracy."""
