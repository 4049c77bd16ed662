"""Gaussian local model around a known amplitude and the averaged two-mode states.

The unknown amplitude is written ``alpha = alpha0 + u / sqrt(n)`` with ``u``
drawn from a circular Gaussian of width ``mu``. All states are expressed in the
displaced frame, where hypothesis 1 (vacuum signal) becomes ``[-alpha0]`` on
the signal mode and the concentrated auxiliary mode carries ``[u]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, TruncationError
from .fock import (
    FockMatrix,
    coherent_vectors,
    poisson_cutoff,
    poisson_tail,
    thermal_cutoff,
    thermal_tail,
)

DEFAULT_ORDER = 40
MAX_DEFICIT = 1e-4


@dataclass(frozen=True)
class LocalModel:
    """Localisation point ``alpha0``, prior width ``mu`` and copy number ``n``."""

    alpha0: float
    mu: float
    n: int

    def __post_init__(self):
        if not (math.isfinite(self.alpha0) and self.alpha0 >= 0.0):
            raise InvalidInputError(f"alpha0 must be a finite nonnegative real, got {self.alpha0}")
        if not (math.isfinite(self.mu) and self.mu > 0.0):
            raise InvalidInputError(f"mu must be positive, got {self.mu}")
        if int(self.n) != self.n or self.n < 1:
            raise InvalidInputError(f"n must be a positive integer, got {self.n}")
        object.__setattr__(self, "alpha0", float(self.alpha0))
        object.__setattr__(self, "mu", float(self.mu))
        object.__setattr__(self, "n", int(self.n))

    @property
    def leading_error(self) -> float:
        """Helstrom error for vacuum against ``|alpha0>`` (the n = infinity value)."""
        return 0.5 * (1.0 - math.sqrt(-math.expm1(-self.alpha0**2)))


@dataclass(frozen=True)
class QuadratureGrid:
    """Nodes and weights for integrals against a 2-D Gaussian density."""

    nodes: np.ndarray
    weights: np.ndarray
    order: int

    def integrate(self, values) -> complex:
        return np.tensordot(self.weights, np.asarray(values), axes=(0, 0))


def _check_mu(mu):
    if not (math.isfinite(mu) and mu > 0.0):
        raise InvalidInputError(f"mu must be positive, got {mu}")


def gaussian_prior_pdf(u, mu: float):
    """Density (1/(pi mu^2)) exp(-|u|^2/mu^2) of the local parameter.

    The exponent uses ``|u|^2``; this is the only reading consistent with
    the moment normalisations used throughout.
    """
    _check_mu(mu)
    return np.exp(-np.abs(u) ** 2 / mu**2) / (math.pi * mu**2)


def gauss_hermite_2d(sigma1: float, sigma2: float, order: int,
                     center: complex = 0.0) -> QuadratureGrid:
    """Tensor Gauss-Hermite grid for a product Gaussian in (Re, Im).

    ``sigma1`` and ``sigma2`` are standard deviations of the two coordinates.
    """
    if int(order) != order or order < 2:
        raise InvalidInputError(f"quadrature order must be >= 2, got {order}")
    x, w = np.polynomial.hermite.hermgauss(int(order))
    w = w / math.sqrt(math.pi)
    s = math.sqrt(2.0)
    nodes = (center + s * sigma1 * x[:, None] + 1j * s * sigma2 * x[None, :]).ravel()
    weights = (w[:, None] * w[None, :]).ravel()
    return QuadratureGrid(nodes, weights, int(order))


def build_quadrature(mu: float, order: int = DEFAULT_ORDER) -> QuadratureGrid:
    """Grid for integrals against ``gaussian_prior_pdf(., mu)``."""
    _check_mu(mu)
    sd = mu / math.sqrt(2.0)
    return gauss_hermite_2d(sd, sd, order)


def thermal_coefficients(mu: float, dim: int) -> np.ndarray:
    """Photon-number distribution c_k = mu^(2k)/(mu^2+1)^(k+1), k < dim."""
    k = np.arange(int(dim))
    m2 = mu * mu
    return np.exp(k * (np.log(m2) - np.log1p(m2)) - np.log1p(m2))


def default_dims(model: LocalModel, tol: float = 1e-8) -> tuple[int, int]:
    """Cutoffs for the (auxiliary, signal) modes with tails below ``tol``."""
    m2 = model.mu**2
    k = thermal_cutoff(m2, tol / 2.0, minimum=4)
    umax2 = (model.alpha0 + 6.0 * model.mu / math.sqrt(model.n)) ** 2
    m = poisson_cutoff(umax2, tol / 2.0, minimum=4)
    return k, m


def _deficit(mu: float, alpha0: float, dims) -> float:
    k, m = dims
    return 1.0 - (1.0 - thermal_tail(mu**2, k)) * (1.0 - poisson_tail(alpha0**2, m))


def _guard(deficit: float, dims):
    if deficit > MAX_DEFICIT:
        raise TruncationError(f"dims {tuple(dims)} lose {deficit:.3e} of the trace")


def averaged_sigma1(model: LocalModel, dims=None) -> FockMatrix:
    """Thermal auxiliary mode times ``[-alpha0]`` on the signal mode."""
    dims = tuple(dims) if dims is not None else default_dims(model)
    k, m = dims
    phi = coherent_vectors(-model.alpha0, m)
    deficit = _deficit(model.mu, model.alpha0, dims)
    _guard(deficit, dims)
    mat = np.kron(np.diag(thermal_coefficients(model.mu, k)), np.outer(phi, phi.conj()))
    return FockMatrix(mat, dims, deficit)


def averaged_sigma2(model: LocalModel, dims=None, order: int = DEFAULT_ORDER) -> FockMatrix:
    """Average of ``[u] (x) [u/sqrt(n)]`` over the prior, by quadrature.

    This is the exact finite-n state; no expansion in ``1/sqrt(n)`` is made.
    """
    dims = tuple(dims) if dims is not None else default_dims(model)
    k, m = dims
    grid = build_quadrature(model.mu, order)
    a = coherent_vectors(grid.nodes, k)
    b = coherent_vectors(grid.nodes / math.sqrt(model.n), m)
    psi = (a[:, :, None] * b[:, None, :]).reshape(len(grid.weights), k * m)
    mat = (psi.T * grid.weights) @ psi.conj()
    deficit = max(0.0, 1.0 - float(np.trace(mat).real))
    _guard(deficit, dims)
    return FockMatrix(mat, dims, deficit)


def _ladder(values: np.ndarray, offset: int, dim: int) -> np.ndarray:
    """Matrix with ``values[k]`` at position (k, k + offset)."""
    out = np.zeros((dim, dim))
    j = np.arange(dim - offset)
    out[j, j + offset] = values[: dim - offset]
    return out


def _unit(dim: int, i: int, j: int) -> np.ndarray:
    e = np.zeros((dim, dim))
    e[i, j] = 1.0
    return e


def sigma2_expansion_terms(model: LocalModel, dims=None):
    """Zero-, first- and second-order pieces of the averaged second state.

    Returns
    -------
    tuple of FockMatrix
        ``(s0, s1, s2)`` with ``s0 + s1/sqrt(n) + s2/n`` reproducing
        :func:`averaged_sigma2` up to ``O(n**-1.5)``.

    Notes
    -----
    With ``c_k`` the thermal weights, the coefficient sequences are
    ``d_k = c_k sqrt(k)`` (one-photon ladder), ``e_k = c_(k+1) (k+1)`` and
    ``f_k = c_k sqrt(k (k-1) / 2)`` (two-photon ladder).
    """
    dims = tuple(dims) if dims is not None else default_dims(model)
    k, m = dims
    if m < 3:
        raise InvalidInputError("signal cutoff must be at least 3 for the expansion")
    c = thermal_coefficients(model.mu, k + 2)
    idx = np.arange(k + 2)
    d = c * np.sqrt(idx)
    e = c[1:] * idx[1:]
    f = c * np.sqrt(idx * np.maximum(idx - 1, 0) / 2.0)

    aux0 = np.diag(c[:k])
    one = _ladder(d[1:], 1, k)          # |j><j+1| weight d_(j+1)
    two = _ladder(f[2:], 2, k)          # |j><j+2| weight f_(j+2)
    s0 = np.kron(aux0, _unit(m, 0, 0))
    s1 = np.kron(one, _unit(m, 1, 0))
    s1 = s1 + s1.T
    s2 = np.kron(np.diag(e[:k]), _unit(m, 1, 1) - _unit(m, 0, 0)) + np.kron(two, _unit(m, 2, 0))
    s2 = s2 + np.kron(two.T, _unit(m, 0, 2))
    deficit = thermal_tail(model.mu**2, k)
    return (FockMatrix(s0, dims, deficit), FockMatrix(s1, dims), FockMatrix(s2, dims))
