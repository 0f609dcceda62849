"""Exception types raised across the package."""

from __future__ import annotations


class IpmBootError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(IpmBootError, ValueError):
    """An argument violates a documented precondition."""


class SingularDesignError(IpmBootError):
    """X'X of a model matrix is not invertible at working precision."""

    def __init__(self, dependent_columns, condition):
        self.dependent_columns = tuple(dependent_columns)
        self.condition = condition
        cols = ", ".join(self.dependent_columns) or "?"
        super().__init__(
            f"singular design (condition {condition:.3g}); dependent columns: {cols}"
        )


class NearSingularMeanError(IpmBootError):
    """The linear predictor phi is too close to zero at some data point."""

    def __init__(self, index, phi):
        self.index = int(index)
        self.phi = float(phi)
        super().__init__(f"|phi| too small at point {self.index} (phi={self.phi:.3g})")


class SingularStartError(IpmBootError):
    """The linearized starting-value regression is rank deficient."""


class NoFeasibleStartError(IpmBootError):
    """Every grid point produced a near-singular mean."""


class SingularJacobianError(IpmBootError):
    """Psi'Psi is too ill-conditioned for a Gauss-Newton step."""

    def __init__(self, condition):
        self.condition = float(condition)
        super().__init__(f"ill-conditioned Jacobian (cond(J'J) = {self.condition:.3g})")


class ExcessDropError(IpmBootError):
    """Too many bootstrap replicates failed to converge."""

    def __init__(self, dropped, total, first_failure):
        self.dropped = dropped
        self.total = total
        self.first_failure = first_failure
        super().__init__(
            f"{dropped} of {total} bootstrap replicates did not converge "
            f"(first failure: {first_failure})"
        )


class PlotFileError(IpmBootError, OSError):
    """Writing a plot file failed."""
