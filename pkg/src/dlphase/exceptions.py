"""Exception types shared across the solver."""


class DlphaseError(Exception):
    """Base class for solver-specific failures."""


class DenominatorVanishes(DlphaseError):
    """The fixed-point update denominator rho sigma_x2 - q_d q_x collapsed.

    Signals that the iterate is flowing into the perfect-recovery corner,
    which is represented analytically rather than by iteration.  The last
    iterate is attached.
    """

    def __init__(self, message, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


class SuccessBranchAbsent(DlphaseError):
    """The perfect-recovery branch does not exist at these parameters."""


class DegenerateDenominator(DlphaseError):
    """A free-entropy denominator is non-positive at the requested point."""


class ConvergenceError(DlphaseError):
    """An iterative solve exhausted its iteration budget."""

    def __init__(self, message, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


class IntegrationError(DlphaseError):
    """Adaptive numerical integration failed its self-consistency check."""


class UndefinedBoundary(DlphaseError):
    """The requested critical line is undefined at these parameters."""
