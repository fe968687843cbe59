"""Exception classes shared across the simulators."""


class FQCPError(Exception):
    """Base class for all package errors."""


class InvalidParams(FQCPError, ValueError):
    pass


class BudgetExceeded(FQCPError, RuntimeError):
    pass


class WindowTooLarge(FQCPError, MemoryError):
    pass


class NotNormalized(FQCPError, ValueError):
    pass


class UnknownKind(FQCPError, ValueError):
    pass


class TooManyQubits(FQCPError, MemoryError):
    pass


class NotClifford(FQCPError, ValueError):
    pass


class DetectionExceedsTarget(FQCPError, ValueError):
    """Raised when the detection rate exceeds the target reset rate.

    ``points`` holds every offending ``(r, t)`` pair.
    """

    def __init__(self, points, p_target):
        self.points = list(points)
        self.p_target = p_target
        super().__init__(
            f"p_detect > p={p_target} at {len(self.points)} point(s): {self.points[:8]}"
        )


class DegenerateRate(FQCPError, ValueError):
    def __init__(self, point):
        self.point = point
        super().__init__(f"empirical reset rate is 0 or 1 at {point}")


class NonpositiveValue(FQCPError, ValueError):
    def __init__(self, t):
        self.t = t
        super().__init__(f"observable is not positive at t={t}")


class NoCrossing(FQCPError, ValueError):
    pass


class TooFewSamples(FQCPError, ValueError):
    pass


class InvariantViolation(FQCPError, RuntimeError):
    """A numerical invariant (trace, hermiticity, ...) drifted past tolerance."""
