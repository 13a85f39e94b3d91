"""Exception types shared across the package."""


class OnsagerError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(OnsagerError, ValueError):
    """Invalid or incomplete run configuration."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class DegenerateQ(OnsagerError):
    """Top two eigenvalues of a Q-tensor are too close to define a director."""


class LiftInconsistency(OnsagerError):
    """Sign propagation of a line field met a contradiction."""


class NonConvergence(OnsagerError):
    """An iteration hit its iteration cap before meeting its tolerance."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class ZeroVector(OnsagerError):
    """Normalization met a (numerically) zero vector."""


class PaddingError(OnsagerError):
    """Zero padding too small for the kernel tail."""


class NoBracket(OnsagerError):
    """Root finding could not bracket or resolve a root."""


class InvariantViolation(OnsagerError):
    """A state or field broke one of its structural invariants."""


class QuadratureInsufficient(OnsagerError):
    """Sphere grid cannot resolve the requested Bingham exponent."""
