"""Exception types shared across the package."""


class HallMHDError(Exception):
    """Base class for all package errors."""


class NonPositiveJacobian(HallMHDError):
    """The mesh mapping folded over: det J <= 0 at some quadrature point."""

    def __init__(self, element, point, det):
        self.element = element
        self.point = point
        self.det = det
        super().__init__(
            f"det J = {det:.3e} <= 0 in element {element} at point {point}"
        )


class SpaceMismatch(HallMHDError):
    """A discrete field was passed to an operation expecting another space."""


class ShapeMismatch(HallMHDError):
    """Matrix/vector dimensions are inconsistent."""


class SingularMatrix(HallMHDError):
    """Direct factorization failed; the system matrix is singular."""


class NoConvergence(HallMHDError):
    """Iterative solver stopped without reaching the requested tolerance."""

    def __init__(self, maxit, residual):
        self.maxit = maxit
        self.residual = residual
        super().__init__(
            f"no convergence after {maxit} iterations, residual {residual:.3e}"
        )


class ResidualTooLarge(HallMHDError):
    """A linear solve inside the time loop exceeded the residual contract."""


class SelfCheckFailed(HallMHDError):
    """A build-time consistency check of derived analytic closures failed."""


class ConfigError(HallMHDError):
    """A run configuration is invalid; the message names the field."""
