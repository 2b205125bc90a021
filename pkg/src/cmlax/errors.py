"""Exception hierarchy shared by every module of the package."""


class CMLaxError(Exception):
    """Base class for all errors raised by cmlax."""


class PoleError(CMLaxError):
    """A function was evaluated on (or numerically at) its singular set."""


class CollisionError(CMLaxError):
    """Two particle positions (or eigenvalues of X) coincide within tolerance."""


class SingularMatrixError(CMLaxError):
    """A matrix that must be invertible is numerically singular."""


class ConstraintError(CMLaxError):
    """Supplied data cannot satisfy the moment-map constraint."""


class QuadratureError(CMLaxError):
    """Contour quadrature did not converge under sample doubling."""


class StepError(CMLaxError):
    """A finite-difference or integration step failed its accuracy check."""


class ConfigError(CMLaxError):
    """A run configuration is malformed or violates the schema."""
