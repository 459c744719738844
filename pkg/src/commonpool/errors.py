"""Exception types raised by the solvers and the simulation engine."""


class CommonPoolError(Exception):
    """Base class for all library errors."""


# --- model / assumption validation ---------------------------------------

class NonPositiveSigma(CommonPoolError):
    """sigma(x)^2 <= 0 detected at a grid point."""


class DriftDerivativeTooLarge(CommonPoolError):
    """mu'(x) >= r detected at a grid point."""


class NonPositiveDriftAtZero(CommonPoolError):
    """mu(0) <= 0."""


class NoExtinctionBound(CommonPoolError):
    """No c below the ceiling satisfies mu(x) <= r*x - 1/c for x >= c."""


# --- fundamental solutions -------------------------------------------------

class StepSizeUnderflow(CommonPoolError):
    """Adaptive integrator step collapsed; coefficient model is pathological."""


class NonMonotone(CommonPoolError):
    """psi' <= 0 detected; signals an assumption violation upstream."""


class SignViolation(CommonPoolError):
    """phi <= 0 or phi' >= 0 detected during backward integration."""


class NoSignChange(CommonPoolError):
    """psi'' has no sign change on the grid; numerically inconsistent."""


# --- equilibrium solvers ----------------------------------------------------

class BracketFailure(CommonPoolError):
    """Threshold equation has no sign change on the guaranteed bracket."""


class NoConvergence(CommonPoolError):
    """Fixed-point iteration exhausted all restarts."""

    def __init__(self, message, best_residual=None, best_profile=None):
        super().__init__(message)
        self.best_residual = best_residual
        self.best_profile = best_profile


class OrderingViolation(CommonPoolError):
    """Converged profile violates the rate/threshold ordering."""


class SingularSystem(CommonPoolError):
    """Degenerate pasting system in the two-player closed form."""


class DomainError(CommonPoolError):
    """Logarithm argument nonpositive in a closed-form threshold formula."""


class NoEquilibriumFound(CommonPoolError):
    """All equilibrium kinds failed in the two-player closed-form search."""

    def __init__(self, message, scan_trace=None):
        super().__init__(message)
        self.scan_trace = scan_trace


# --- simulation / CLI ------------------------------------------------------

class InvalidConfig(CommonPoolError):
    """Malformed simulation or run configuration."""


class OutOfDomain(CommonPoolError):
    """Evaluation point outside [0, x_max]."""
