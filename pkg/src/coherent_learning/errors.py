"""Exception hierarchy shared by every module."""


class CoherentLearningError(Exception):
    """Base class for all package errors."""


class InvalidInputError(CoherentLearningError, ValueError):
    """An argument violates a documented precondition."""


class NumericalError(CoherentLearningError, ArithmeticError):
    """A numerical routine failed or produced an untrustworthy result."""


class DegeneracyError(NumericalError):
    """Perturbation theory met a degenerate zero-order spectrum."""


class TruncationError(NumericalError):
    """Fock truncation discarded more probability than allowed."""
