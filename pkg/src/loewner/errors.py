"""Exception hierarchy shared across the package."""


class LoewnerError(Exception):
    """Base class for all library errors."""


class DomainError(LoewnerError, ValueError):
    """A function was evaluated outside the set where it is defined."""


class PreconditionError(LoewnerError, ValueError):
    """A numerical precondition of an inequality does not hold."""


class NonHermitianError(PreconditionError):
    """Input matrix is not Hermitian within tolerance."""


class NonCommutingError(PreconditionError):
    """An operator tuple that must commute does not."""


class FitError(LoewnerError, RuntimeError):
    """Envelope fitting exhausted its budget before reaching the target gap."""

    def __init__(self, message: str, best_gap: float, schedule: tuple[int, ...]):
        super().__init__(message)
        self.best_gap = best_gap
        self.schedule = schedule
