"""Numerical toolkit for Onsager's nonlocal free energy of nematic liquid
crystals with strong anchoring, and for the limit of its minimizers as the
interaction length shrinks: Bingham closure, Q-tensor lattice fields, Gaussian
kernel multipliers, self-consistent minimization and harmonic-map references."""
from . import bingham, checks, energy, harmonic, io, kernel, qfield, solver, sphere
from .errors import (
    ConfigError,
    DegenerateQ,
    InvariantViolation,
    LiftInconsistency,
    NonConvergence,
    NoBracket,
    PaddingError,
    ZeroVector,
)

__version__ = "0.1.0"
