"""Exception hierarchy shared by all distlasso modules."""

from __future__ import annotations


class DistLassoError(Exception):
    """Base class for all distlasso errors."""


class InvalidInputError(DistLassoError):
    """Malformed or out-of-contract input (bad shapes, non-finite data,
    out-of-range parameters, unreadable files)."""


class InvalidCovarianceError(InvalidInputError):
    """Covariance specification is not positive definite."""


class UnboundedObjectiveError(InvalidInputError):
    """A penalized quadratic has a direction of unbounded descent
    (zero curvature with a linear term exceeding the penalty)."""


class InvalidLossError(DistLassoError):
    """A loss model violated its contract (e.g. negative curvature)."""


class NonConvergenceError(DistLassoError):
    """Solver exhausted its sweep budget.

    Carries the last iterate and its optimality violation so callers can
    inspect or resume.
    """

    def __init__(self, message, beta=None, violation=None, shard_id=None):
        super().__init__(message)
        self.beta = beta
        self.violation = violation
        self.shard_id = shard_id


class InfeasibleRowError(DistLassoError):
    """A precision row program stayed infeasible after slack escalation."""

    def __init__(self, row, delta, shard_id=None):
        super().__init__(
            f"precision row {row} infeasible at slack {delta:.3e}"
            + (f" (shard {shard_id})" if shard_id is not None else "")
        )
        self.row = row
        self.delta = delta
        self.shard_id = shard_id


class DegenerateColumnError(DistLassoError):
    """A nodewise residual variance collapsed to (numerical) zero."""

    def __init__(self, row, tau_sq, shard_id=None):
        super().__init__(
            f"degenerate column {row}: residual variance {tau_sq:.3e}"
            + (f" (shard {shard_id})" if shard_id is not None else "")
        )
        self.row = row
        self.tau_sq = tau_sq
        self.shard_id = shard_id
