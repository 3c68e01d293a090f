"""Exception types raised across the package."""


class DecayError(ValueError):
    """Base class for all package errors."""


class EmptyGrid(DecayError):
    pass


class NonPositiveMu(DecayError):
    pass


class NegativeAlpha(DecayError):
    pass


class ThetaOutOfRange(DecayError):
    pass


class LengthMismatch(DecayError):
    pass


class StepConstraint(DecayError):
    pass


class NonMonotoneMu(DecayError):
    pass


class ExponentOutOfRange(DecayError):
    pass


class DomainMismatch(DecayError):
    pass


class RankOutOfRange(DecayError):
    pass


class MissingDiagnostics(DecayError):
    pass


class BlowUp(DecayError):
    """The integrated solution left the finite range before ``t_end``.

    The partial trajectory up to the escape is kept on ``trajectory``.
    """

    def __init__(self, message, trajectory=None, escape_time=None):
        super().__init__(message)
        self.trajectory = trajectory
        self.escape_time = escape_time


class StepUnderflow(DecayError):
    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class Overflow(DecayError):
    def __init__(self, message, index=None, values=None):
        super().__init__(message)
        self.index = index
        self.values = values


class SolveFailure(DecayError):
    """Linear solve of ``J(u) + a I`` failed, usually a non-monotone operator."""


class NoConvergence(DecayError):
    """Damped Newton did not reach the requested residual.

    ``iterate`` and ``residual`` hold the last state; ``index`` is set by
    continuation drivers to the step at which the failure happened.
    """

    def __init__(self, message, iterate=None, residual=None, index=None):
        super().__init__(message)
        self.iterate = iterate
        self.residual = residual
        self.index = index
