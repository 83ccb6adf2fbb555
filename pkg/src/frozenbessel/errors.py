"""Exception hierarchy shared by all modules."""


class FreezingError(Exception):
    """Base class for errors raised by this package."""


class UsageError(FreezingError, ValueError):
    """Invalid arguments: wrong dimension, parameter out of range, bad config."""


class ChamberError(UsageError):
    """A point is not in the required (closed or open) Weyl chamber."""


class SingularityError(FreezingError, ArithmeticError):
    """Two particles (or a particle and the origin) coincide.

    ``pair`` holds the offending indices; for the mirrored interaction
    ``x_i + x_j`` the pair is reported as ``(i, -j)``, for a zero coordinate
    in the type-B drift as ``(i, None)``.
    """

    def __init__(self, message, pair=None):
        super().__init__(message)
        self.pair = pair


class IntegrationError(FreezingError, RuntimeError):
    """ODE/SDE step-size underflow; ``last_time`` is the last accepted time."""

    def __init__(self, message, last_time=None):
        super().__init__(message)
        self.last_time = last_time


class ExperimentError(FreezingError, RuntimeError):
    """A numerical failure inside an experiment, with the experiment named in the message."""
