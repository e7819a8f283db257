"""Exception types raised across the package."""
from __future__ import annotations


class FptError(Exception):
    """Base class for all errors raised by mortal_fpt."""


class ConfigError(FptError, ValueError):
    """A config file or mapping could not be parsed into a problem."""


# --- problem validation -------------------------------------------------


class ProblemValidationError(FptError, ValueError):
    """One or more standing assumptions on a problem are violated.

    ``violations`` holds every individual violation found, so callers can
    report all of them at once.
    """

    def __init__(self, message: str, violations: list[ProblemValidationError] | None = None):
        super().__init__(message)
        self.violations = violations if violations is not None else [self]


class StartInsideTarget(ProblemValidationError):
    pass


class DisconnectedDomain(ProblemValidationError):
    pass


class DegenerateDiffusivity(ProblemValidationError):
    pass


class EmptyTarget(ProblemValidationError):
    pass


# --- analytic ---------------------------------------------------------------


class NegativeTime(FptError, ValueError):
    pass


class NonpositiveTime(FptError, ValueError):
    pass


class NonpositiveLength(FptError, ValueError):
    pass


class NonpositiveDiffusivity(FptError, ValueError):
    pass


class UnsupportedOrder(FptError, ValueError):
    pass


class UnsupportedShape(FptError, ValueError):
    pass


class OrderingViolation(FptError, ValueError):
    pass


# --- quadrature -------------------------------------------------------------


class NonconvergedQuadrature(FptError, ArithmeticError):
    pass


class DegenerateCdf(FptError, ArithmeticError):
    pass


class UnderflowRegion(FptError, ArithmeticError):
    pass


class EmptySampleSet(FptError, ValueError):
    pass


# --- simulation -------------------------------------------------------------


class StepSizeUnstable(FptError, ValueError):
    pass


class EffectiveSampleTooSmall(FptError, ArithmeticError):
    pass


class AllCensored(FptError, ArithmeticError):
    pass


# --- geodesic ---------------------------------------------------------------


class OverlappingSets(FptError, ValueError):
    pass


class NoPath(FptError, ArithmeticError):
    pass


class NonSPDMetric(FptError, ValueError):
    pass


class AnisotropicInput(FptError, ValueError):
    pass
