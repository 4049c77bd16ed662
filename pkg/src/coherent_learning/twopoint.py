"""Two-valued amplitude model: ``alpha = alpha0 +- 1/sqrt(n)`` with equal priors.

In the displaced frame the concentrated auxiliary mode is ``|h>`` with
``h = +-1`` and the signal alternatives are ``[-alpha0]`` and ``[h/sqrt(n)]``.
A local strategy measures the auxiliary mode with a two-outcome projective
measurement in the real plane of ``|1>`` and ``|-1>``, fixed by ``c = |<e+|1>|``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .collective import _check_alpha_positive, richardson, trace_norm_expansion
from .eand import GaussianMoments, eand_operators
from .errors import DegeneracyError, InvalidInputError
from .fock import coherent_vectors

CHI = math.exp(-2.0)
DEFAULT_SURROGATE = 10_000


def _check_c(c: float):
    if not (0.0 <= c <= 1.0):
        raise InvalidInputError(f"c must lie in [0, 1], got {c}")


@dataclass(frozen=True)
class TwoPointPovm:
    """Projective measurement ``{|e+>, |e->}`` on the auxiliary plane."""

    c: float

    def __post_init__(self):
        _check_c(self.c)

    @property
    def probabilities(self) -> tuple[float, float]:
        return p_plus_minus(self.c)

    def vectors(self) -> np.ndarray:
        """Rows ``e+``, ``e-`` in the orthonormal frame where ``|1> = (1, 0)``."""
        s = math.sqrt(1.0 - self.c**2)
        return np.array([[self.c, -s], [s, self.c]])


def aux_frame() -> np.ndarray:
    """Rows ``|1>`` and ``|-1>`` in an orthonormal real frame."""
    return np.array([[1.0, 0.0], [CHI, math.sqrt(1.0 - CHI**2)]])


def p_plus_minus(c: float) -> tuple[float, float]:
    """Probabilities of a correct outcome, ``|<e+|1>|^2`` and ``|<e-|-1>|^2``."""
    _check_c(c)
    return c * c, 1.0 - (c * CHI - math.sqrt(1.0 - c * c) * math.sqrt(1.0 - CHI**2)) ** 2


def optimal_c() -> float:
    """Overlap parameter of the best local measurement."""
    return (math.sqrt(1.0 + CHI) + math.sqrt(1.0 - CHI)) / 2.0


def _likelihoods(c: float) -> dict:
    """``L[h][o]`` = probability of outcome ``o`` when the auxiliary is ``|h>``."""
    p, q = p_plus_minus(c)
    return {+1: {+1: p, -1: 1.0 - p}, -1: {+1: 1.0 - q, -1: q}}


def _g(x):
    return np.sqrt(-np.expm1(-np.asarray(x) ** 2))


def known_second_derivative(alpha0: float) -> float:
    """``g''`` for ``g(x) = sqrt(1 - exp(-x^2))``."""
    x2 = alpha0 * alpha0
    y = math.exp(-x2)
    one = -math.expm1(-x2)
    return (y * one**-0.5 - 2.0 * x2 * y * one**-0.5 - x2 * y * y * one**-1.5)


def _known_coefficient(alpha0: float) -> float:
    """``1/n`` coefficient of the error with the amplitude revealed."""
    return -known_second_derivative(alpha0) / 4.0


def pe_known(alpha0: float, n: int) -> float:
    amps = alpha0 + np.array([1.0, -1.0]) / math.sqrt(n)
    return float(np.mean(0.5 * (1.0 - _g(amps))))


# --------------------------------------------------------------------------
# exact finite-n errors
# --------------------------------------------------------------------------

def _signal_vectors(alpha0: float, n: int, basis: str = "gram") -> np.ndarray:
    """Rows ``|-alpha0>``, ``|1/sqrt(n)>``, ``|-1/sqrt(n)>`` in a common real frame."""
    pts = np.array([-alpha0, 1.0 / math.sqrt(n), -1.0 / math.sqrt(n)])
    if basis == "fock":
        dim = max(30, int(alpha0**2 + 12 * alpha0 + 30))
        return coherent_vectors(pts, dim).real
    if basis != "gram":
        raise InvalidInputError(f"unknown basis {basis!r}")
    gram = np.exp(-0.5 * (pts[:, None] - pts[None, :]) ** 2)
    return np.linalg.cholesky(gram)


def _tn(mat: np.ndarray) -> float:
    return float(np.sum(np.abs(np.linalg.eigvalsh(mat))))


def two_point_collective_pe(alpha0: float, n: int, basis: str = "gram") -> float:
    """Joint Helstrom error for the two averaged auxiliary-signal states."""
    sig = _signal_vectors(alpha0, n, basis)
    aux = aux_frame()
    proj = lambda x: np.outer(x, x)  # noqa: E731
    s1 = 0.5 * sum(np.kron(proj(aux[i]), proj(sig[0])) for i in range(2))
    s2 = 0.5 * sum(np.kron(proj(aux[i]), proj(sig[1 + i])) for i in range(2))
    return 0.5 * (1.0 - 0.5 * _tn(s1 - s2))


def two_point_local_pe(alpha0: float, c: float, n: int, basis: str = "gram") -> float:
    """Error of measure-then-discriminate with the ``c`` measurement."""
    _check_c(c)
    sig = _signal_vectors(alpha0, n, basis)
    lik = _likelihoods(c)
    proj = lambda x: np.outer(x, x)  # noqa: E731
    total = 0.0
    for o in (+1, -1):
        p_o = 0.5 * (lik[+1][o] + lik[-1][o])
        if p_o == 0.0:
            continue
        rho = (0.5 * lik[+1][o] * proj(sig[1]) + 0.5 * lik[-1][o] * proj(sig[2])) / p_o
        total += p_o * 0.5 * (1.0 - 0.5 * _tn(proj(sig[0]) - rho))
    return total


# --------------------------------------------------------------------------
# 1/n coefficients
# --------------------------------------------------------------------------

def _local_coefficient(alpha0: float, c: float) -> float:
    lik = _likelihoods(c)
    total = 0.0
    for o in (+1, -1):
        p_o = 0.5 * (lik[+1][o] + lik[-1][o])
        if p_o == 0.0:
            continue
        mean = (lik[+1][o] - lik[-1][o]) / (2.0 * p_o)
        A, B, C = eand_operators(alpha0, GaussianMoments(mean, 1.0, 1.0))
        total += p_o * trace_norm_expansion(A, B, C)[2]
    return -total / 4.0


def two_point_local_excess_risk(alpha0: float, c: float, n_surrogate: int | None = None) -> float:
    """Local excess risk for the ``c`` measurement.

    Without ``n_surrogate`` the ``1/n`` coefficient comes from second-order
    perturbation of each conditional trace norm. With it, the coefficient is
    Richardson-extrapolated from exact errors at ``n_surrogate`` and
    ``4 n_surrogate``.
    """
    if alpha0 == 0.0:
        raise DegeneracyError("two-point model is degenerate at alpha0 = 0")
    _check_alpha_positive(alpha0)
    _check_c(c)
    if n_surrogate is None:
        return _local_coefficient(alpha0, c) - _known_coefficient(alpha0)
    f = [m * (two_point_local_pe(alpha0, c, m) - pe_known(alpha0, m))
         for m in (n_surrogate, 4 * n_surrogate)]
    return richardson(*f)


def two_point_collective_perturbative(alpha0: float) -> float:
    """Collective excess risk from the second-order trace-norm expansion."""
    _check_alpha_positive(alpha0)
    aux = aux_frame()
    proj = lambda x: np.outer(x, x)  # noqa: E731
    a_sig, _, _ = eand_operators(alpha0, GaussianMoments(0.0, 0.0, 0.0))
    _, b_sig, c_sig = eand_operators(alpha0, GaussianMoments(1.0, 1.0, 1.0))
    A = sum(0.5 * np.kron(proj(aux[i]), a_sig) for i in range(2))
    B = sum(0.5 * h * np.kron(proj(aux[i]), b_sig) for i, h in enumerate((1, -1)))
    C = sum(0.5 * np.kron(proj(aux[i]), c_sig) for i in range(2))
    t2 = trace_norm_expansion(A, B, C)[2]
    return -t2 / 4.0 - _known_coefficient(alpha0)


def two_point_collective_excess_risk(alpha0: float,
                                     n_surrogate: int = DEFAULT_SURROGATE) -> float:
    """Collective excess risk, Richardson-extrapolated from ``n`` and ``4n``."""
    if alpha0 == 0.0:
        raise DegeneracyError("two-point model is degenerate at alpha0 = 0")
    _check_alpha_positive(alpha0)
    f = [m * (two_point_collective_pe(alpha0, m) - pe_known(alpha0, m))
         for m in (n_surrogate, 4 * n_surrogate)]
    return richardson(*f)
