"""Exception hierarchy.  Every error carries enough context to be actionable."""

from __future__ import annotations


class NodalNehariError(Exception):
    """Base class for all library errors."""

    def __init__(self, message: str = "", **context):
        super().__init__(message)
        self.context = context


class NoProjection(NodalNehariError):
    """The fiber ``t -> I(tu)`` has no interior maximum (``a_inf >= 0``)."""


class LambdaTooLarge(NoProjection):
    """Projection failed persistently while computing the positive solution."""


class BracketFailure(NodalNehariError):
    """No sign change of ``gamma(tu)`` was found on the scanned range."""


class EdgeConditionViolated(NodalNehariError):
    """A sampled Miranda edge condition failed."""

    def __init__(self, message: str = "", edge: str = "", sample=None, value=None, **context):
        super().__init__(message, edge=edge, sample=sample, value=value, **context)
        self.edge = edge
        self.sample = sample
        self.value = value


class NoConvergence(NodalNehariError):
    """An iterative solver exhausted its evaluation budget."""


class DegenerateSign(NodalNehariError):
    """The field does not change sign, so it has no nodal projection."""


class NoPositiveAnnulus(NodalNehariError):
    """``u^2 - lambda phi_u`` has no positive mass to build annuli from."""


class RampTooCoarse(NodalNehariError):
    """A cutoff ramp spans fewer grid cells than required."""


class NoT0(NodalNehariError):
    """The outer scale search ran past its ceiling."""


class GridTooCoarse(NodalNehariError):
    """The rescaled inner annulus is not resolved by the grid."""


class ProjectionLost(NodalNehariError):
    """Re-projection onto the nodal set failed during descent."""


class MaxIterExceeded(NodalNehariError):
    """The minimiser hit its iteration cap; ``report`` holds the last iterate."""

    def __init__(self, message: str = "", report=None, **context):
        super().__init__(message, **context)
        self.report = report


class CertificationFailed(NodalNehariError):
    """A certificate clause did not hold; ``clause`` names it."""

    def __init__(self, message: str = "", clause: str = "", **context):
        super().__init__(message, clause=clause, **context)
        self.clause = clause
