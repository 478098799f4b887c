"""Exception types raised across the package."""


class KinUQError(Exception):
    """Base class for all package errors."""


class ConfigError(KinUQError, ValueError):
    """Invalid model, solver or experiment configuration."""


class ParameterError(ConfigError):
    """Parameters outside the range where a formula holds."""


class DomainError(KinUQError, ValueError):
    """Argument outside the domain of a function."""


class BoundsViolation(KinUQError):
    """A post-interaction state left a bounded state space."""


class NonConvergence(KinUQError, ArithmeticError):
    """An iterative root finder did not converge."""


class SingularDiffusion(KinUQError, ArithmeticError):
    """A quadrature node hit a point where the diffusion vanishes."""


class StabilityViolation(KinUQError, ArithmeticError):
    """Time step blew up the solution (total variation explosion)."""


class NotConverged(KinUQError):
    """Steady-state iteration stopped at ``t_max`` above tolerance."""

    def __init__(self, residual, result=None):
        super().__init__(f"steady state not reached, final residual {residual:.3e}")
        self.residual = residual
        self.result = result


class BackendMismatch(KinUQError):
    """Operation requires grid fields but the ensemble holds particles."""


class EmptyRange(KinUQError, ValueError):
    """Histogram range is empty or holds no samples."""


class MissingData(KinUQError, FileNotFoundError):
    """Expected run output files are missing."""
