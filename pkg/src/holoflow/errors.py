"""Exception hierarchy.

Two families matter to callers: ``ValidationError`` (bad input, the CLI exits
with status 2) and ``NumericFailure`` (an algorithm could not certify its
result, the CLI exits with status 3).
"""

from __future__ import annotations


class HoloflowError(Exception):
    """Base class for every error raised by the package."""


class ValidationError(HoloflowError, ValueError):
    """Input violates a documented precondition."""


class NumericFailure(HoloflowError, ArithmeticError):
    """A numerical procedure failed to reach its tolerance."""


# algebra
class NonConvergence(NumericFailure):
    pass


class DegenerateDenominator(NumericFailure):
    pass


# flow
class StepUnderflow(NumericFailure):
    pass


class PoleTooClose(NumericFailure):
    pass


class WindingAmbiguous(NumericFailure):
    pass


# polyfield
class InconsistentEnclosure(NumericFailure):
    pass


class SubsetExplosion(ValidationError):
    pass


# unfolding
class NotParabolic(ValidationError):
    pass


class NotTransversal(ValidationError):
    pass


class DenominatorVanishes(ValidationError):
    pass


class BranchCollision(NumericFailure):
    pass


class DepthExceeded(NumericFailure):
    pass


# longtraj
class LevelSetLost(NumericFailure):
    pass


class OrbitEscaped(NumericFailure):
    pass


class PetalExit(ValidationError):
    pass


class BudgetExhausted(NumericFailure):
    pass


# conjugacy
class DegenerateBasis(ValidationError):
    pass


class NearFixedCurve(NumericFailure):
    pass


class PathBlowup(NumericFailure):
    pass
