"""Exception hierarchy shared by the simulator, solvers and harness."""

from __future__ import annotations


class SwarmError(Exception):
    """Base class for every error raised by this package."""


class ContractViolation(SwarmError, ValueError):
    """A function was called with arguments outside its precondition."""


class ConfigError(SwarmError, ValueError):
    """A configuration document or named preset is invalid."""


class InfeasiblePlacementError(SwarmError):
    """A placement puts two UAVs in one cell or leaves the grid."""


class InfeasibleLinkError(SwarmError):
    """A required transfer runs over a link with zero data rate."""


class InfeasiblePlanError(SwarmError):
    """An allocation plan violates one or more problem constraints.

    ``violations`` holds the constraint tags ("8a" ... "8h") that failed.
    """

    def __init__(self, violations, message: str | None = None):
        self.violations = tuple(violations)
        if message is None:
            message = "infeasible plan, violated: " + ", ".join(self.violations)
        super().__init__(message)


class NumericFailure(SwarmError, FloatingPointError):
    """A training update produced a non-finite value."""
