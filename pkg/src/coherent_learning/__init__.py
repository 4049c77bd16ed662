"""Minimum-error discrimination of coherent states with an uncertain amplitude.

Submodules
----------
fock        truncated Fock-space linear algebra and Helstrom errors
localmodel  Gaussian local model, quadrature, averaged two-mode states
collective  joint-measurement strategy, perturbation engine, closed forms
eand        estimate-and-discriminate strategy with heterodyne estimation
twopoint    two-valued amplitude toy model
cli         command-line front end
"""

from .errors import (
    CoherentLearningError,
    DegeneracyError,
    InvalidInputError,
    NumericalError,
    TruncationError,
)

__all__ = [
    "CoherentLearningError",
    "DegeneracyError",
    "InvalidInputError",
    "NumericalError",
    "TruncationError",
]

__version__ = "0.1.0"
