"""Exception types raised across the package."""

from __future__ import annotations


class QpsynthError(Exception):
    """Base class for package errors."""


class UnitarityError(QpsynthError):
    """Input matrix is not unitary within tolerance."""

    def __init__(self, deviation: float, tol: float):
        self.deviation = deviation
        self.tol = tol
        super().__init__(
            f"matrix violates unitarity: ||U^dag U - I||_F = {deviation:.3e} "
            f"exceeds tolerance {tol:.1e}"
        )


class InvalidStateError(QpsynthError):
    """Density matrix fails hermiticity / trace / positivity checks."""


class DimensionMismatchError(QpsynthError):
    """Operands have incompatible dimensions."""


class EmptyLibraryError(QpsynthError):
    """Gate enumeration produced no entries within the requested precision."""

    def __init__(self, epsilon: float, t_budget: int, best_distance: float | None):
        self.epsilon = epsilon
        self.t_budget = t_budget
        self.best_distance = best_distance
        hint = (
            f"closest sequence found has distance {best_distance:.3e}; "
            if best_distance is not None
            else ""
        )
        super().__init__(
            f"no sequence within epsilon={epsilon:.3e} at T budget {t_budget}; "
            f"{hint}increase epsilon or the T budget"
        )


class ExactSolutionUnavailableError(QpsynthError):
    """Homotopy path did not reach an exact solution."""

    def __init__(self, best_residual: float, threshold: float):
        self.best_residual = best_residual
        self.threshold = threshold
        super().__init__(
            f"path did not reach an exact solution: best residual "
            f"{best_residual:.3e} exceeds threshold {threshold:.3e}"
        )


class L1NotAttainedError(QpsynthError):
    """Requested L1 norm is outside the range traced by the path."""

    def __init__(self, target: float, lo: float, hi: float):
        self.target = target
        self.lo = lo
        self.hi = hi
        super().__init__(
            f"target L1 norm {target:.6g} not attained on the path "
            f"(range [{lo:.6g}, {hi:.6g}])"
        )
