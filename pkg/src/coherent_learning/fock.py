"""Truncated Fock-space linear algebra.

Amplitudes are plain Python ``complex`` numbers; :func:`as_amplitude` is the
single validation point. Operators live in :class:`FockMatrix`, an immutable
dense container that also records how much probability truncation discarded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm
from scipy.special import gammainc, gammaln

from .errors import InvalidInputError, NumericalError

HERMITIAN_TOL = 1e-12


def as_amplitude(z) -> complex:
    """Return ``z`` as a finite complex number or raise InvalidInputError."""
    try:
        w = complex(z)
    except (TypeError, ValueError) as exc:
        raise InvalidInputError(f"not a complex amplitude: {z!r}") from exc
    if not (math.isfinite(w.real) and math.isfinite(w.imag)):
        raise InvalidInputError(f"amplitude must be finite, got {w!r}")
    return w


def _check_dim(dim) -> int:
    if int(dim) != dim or dim < 1:
        raise InvalidInputError(f"dimension must be a positive integer, got {dim!r}")
    return int(dim)


def poisson_tail(mean: float, dim: int) -> float:
    """Probability that a Poisson(mean) variable is at least ``dim``."""
    if mean <= 0.0:
        return 0.0
    return float(gammainc(dim, mean))


def thermal_tail(mean_photons: float, dim: int) -> float:
    """Weight of a thermal state above the cutoff: (N/(N+1))^dim."""
    if mean_photons <= 0.0:
        return 0.0
    return float(np.exp(dim * np.log(mean_photons / (mean_photons + 1.0))))


def poisson_cutoff(mean: float, tol: float = 1e-12, minimum: int = 1) -> int:
    """Smallest dim whose Poisson tail is below ``tol``."""
    dim = max(minimum, int(mean) + 1)
    while poisson_tail(mean, dim) > tol:
        dim += max(1, dim // 8)
    return dim


def thermal_cutoff(mean_photons: float, tol: float = 1e-12, minimum: int = 1) -> int:
    """Smallest dim whose thermal tail is below ``tol``."""
    if mean_photons <= 0.0:
        return minimum
    q = mean_photons / (mean_photons + 1.0)
    return max(minimum, int(math.ceil(math.log(tol) / math.log(q))))


def coherent_vectors(z, dim: int) -> np.ndarray:
    """Fock coefficients of many coherent states at once.

    Parameters
    ----------
    z : array_like of complex
        Amplitudes, any shape.
    dim : int
        Fock cutoff.

    Returns
    -------
    ndarray
        Shape ``z.shape + (dim,)``.
    """
    z = np.asarray(z, dtype=complex)
    k = np.arange(dim)
    r = np.abs(z)[..., None]
    with np.errstate(divide="ignore", invalid="ignore"):
        logr = np.where(r > 0.0, np.log(np.where(r > 0.0, r, 1.0)), -np.inf)
        mag = np.exp(-0.5 * r**2 + k * logr - 0.5 * gammaln(k + 1.0))
    mag[..., 0] = np.exp(-0.5 * np.abs(z) ** 2)
    return mag * np.exp(1j * np.angle(z)[..., None] * k)


@dataclass(frozen=True)
class FockKet:
    """A truncated ket together with its norm deficit."""

    entries: np.ndarray
    norm_deficit: float = 0.0

    def __post_init__(self):
        e = np.array(self.entries, dtype=complex).ravel()
        e.setflags(write=False)
        object.__setattr__(self, "entries", e)
        nrm = float(np.vdot(e, e).real)
        if nrm > 1.0 + 1e-12:
            raise InvalidInputError(f"ket norm {nrm} exceeds 1")
        if self.norm_deficit < -1e-12:
            raise InvalidInputError("norm deficit must be nonnegative")

    @property
    def dim(self) -> int:
        return self.entries.size

    def projector(self) -> "FockMatrix":
        return FockMatrix(np.outer(self.entries, self.entries.conj()), (self.dim,),
                          trace_deficit=max(self.norm_deficit, 0.0))


@dataclass(frozen=True)
class FockMatrix:
    """Dense operator on a tensor product of truncated modes.

    Parameters
    ----------
    entries : array_like
        Square matrix of size ``prod(dims)``.
    dims : tuple of int
        Per-mode cutoffs, first mode slowest.
    trace_deficit : float
        Probability mass lost to truncation.
    hermitian : bool
        When true, Hermiticity is checked and the stored matrix is
        exactly symmetrised.
    """

    entries: np.ndarray
    dims: tuple = ()
    trace_deficit: float = 0.0
    hermitian: bool = True

    def __post_init__(self):
        m = np.array(self.entries, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise InvalidInputError(f"expected a square matrix, got shape {m.shape}")
        dims = tuple(int(d) for d in self.dims) if self.dims else (m.shape[0],)
        if int(np.prod(dims)) != m.shape[0]:
            raise InvalidInputError(f"dims {dims} do not match matrix size {m.shape[0]}")
        if self.trace_deficit < 0.0:
            raise InvalidInputError("trace deficit must be nonnegative")
        if self.hermitian:
            scale = max(1.0, float(np.max(np.abs(m))) if m.size else 1.0)
            defect = float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0
            if defect > HERMITIAN_TOL * scale:
                raise InvalidInputError(f"matrix not Hermitian (defect {defect:.3e})")
            m = 0.5 * (m + m.conj().T)
        m.setflags(write=False)
        object.__setattr__(self, "entries", m)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "trace_deficit", float(self.trace_deficit))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def trace(self) -> complex:
        return complex(np.trace(self.entries))

    def is_density(self, tol: float = 1e-10) -> bool:
        if not self.hermitian:
            return False
        w = np.linalg.eigvalsh(self.entries)
        tr = self.trace().real
        return bool(w.min() >= -tol and 1 - self.trace_deficit - tol <= tr <= 1 + tol)

    def __add__(self, other: "FockMatrix") -> "FockMatrix":
        _same_dims(self, other)
        return FockMatrix(self.entries + other.entries, self.dims,
                          self.trace_deficit + other.trace_deficit,
                          self.hermitian and other.hermitian)

    def __sub__(self, other: "FockMatrix") -> "FockMatrix":
        _same_dims(self, other)
        return FockMatrix(self.entries - other.entries, self.dims,
                          self.trace_deficit + other.trace_deficit,
                          self.hermitian and other.hermitian)

    def scaled(self, c: float) -> "FockMatrix":
        """Real multiple; the deficit scales with ``|c|``."""
        return FockMatrix(c * self.entries, self.dims, abs(c) * self.trace_deficit,
                          self.hermitian)


def _same_dims(a: FockMatrix, b: FockMatrix):
    if a.dims != b.dims:
        raise InvalidInputError(f"dimension mismatch: {a.dims} vs {b.dims}")


def coherent_ket(alpha, dim: int) -> FockKet:
    """Truncated coherent state ``|alpha>``.

    The norm deficit is the exact Poisson tail ``P(N >= dim)``.
    """
    alpha = as_amplitude(alpha)
    dim = _check_dim(dim)
    vec = coherent_vectors(alpha, dim)
    return FockKet(vec, poisson_tail(abs(alpha) ** 2, dim))


def annihilation(dim: int) -> np.ndarray:
    """Truncated lowering operator."""
    return np.diag(np.sqrt(np.arange(1.0, dim)), 1).astype(complex)


def displacement_matrix(alpha, dim: int) -> FockMatrix:
    """exp(alpha a^dag - alpha^* a) on the truncated space.

    The result is flagged non-Hermitian. Its ``trace_deficit`` carries the
    Poisson tail of ``D(alpha)|0>`` so callers can judge the cutoff.
    """
    alpha = as_amplitude(alpha)
    dim = _check_dim(dim)
    a = annihilation(dim)
    gen = alpha * a.conj().T - np.conj(alpha) * a
    return FockMatrix(expm(gen), (dim,), poisson_tail(abs(alpha) ** 2, dim), hermitian=False)


def beam_splitter_pair(alpha, beta, T: float) -> tuple[complex, complex]:
    """Output amplitudes of a beam splitter with transmissivity ``T``."""
    alpha, beta = as_amplitude(alpha), as_amplitude(beta)
    if not (0.0 <= T <= 1.0):
        raise InvalidInputError(f"transmissivity must lie in [0, 1], got {T}")
    t, r = math.sqrt(T), math.sqrt(1.0 - T)
    return t * alpha + r * beta, -r * alpha + t * beta


def concentrate(n: int, alpha) -> complex:
    """Fold ``n`` copies of ``|alpha>`` into one mode of amplitude sqrt(n) alpha.

    Step ``k`` mixes the accumulated ``|sqrt(k) alpha>`` with a fresh copy at
    ``T = k/(k+1)``; the discarded port must come out in vacuum.
    """
    alpha = as_amplitude(alpha)
    if int(n) != n or n < 1:
        raise InvalidInputError(f"n must be a positive integer, got {n!r}")
    acc = alpha
    for k in range(1, int(n)):
        acc, rest = beam_splitter_pair(acc, alpha, k / (k + 1.0))
        if abs(rest) > 1e-12 * max(1.0, abs(alpha)):
            raise NumericalError(f"concentration step {k} left amplitude {rest!r} behind")
    return acc


def tensor(a: FockMatrix, b: FockMatrix) -> FockMatrix:
    """Kronecker product with concatenated dims."""
    deficit = 1.0 - (1.0 - a.trace_deficit) * (1.0 - b.trace_deficit)
    return FockMatrix(np.kron(a.entries, b.entries), a.dims + b.dims,
                      max(deficit, 0.0), a.hermitian and b.hermitian)


def partial_trace(m: FockMatrix, keep) -> FockMatrix:
    """Trace out every mode not listed in ``keep``."""
    keep = [keep] if np.isscalar(keep) else list(keep)
    nm = len(m.dims)
    if any(k < 0 or k >= nm for k in keep):
        raise InvalidInputError(f"mode index out of range for dims {m.dims}")
    t = m.entries.reshape(m.dims + m.dims)
    for mode in sorted(set(range(nm)) - set(keep), reverse=True):
        cur = t.ndim // 2
        t = np.trace(t, axis1=mode, axis2=mode + cur)
    d = tuple(m.dims[k] for k in sorted(keep))
    size = int(np.prod(d))
    return FockMatrix(t.reshape(size, size), d, m.trace_deficit, m.hermitian)


def _eigh(mat: np.ndarray, values_only: bool = True):
    try:
        if values_only:
            return np.linalg.eigvalsh(mat)
        return np.linalg.eigh(mat)
    except np.linalg.LinAlgError as exc:
        finite = bool(np.all(np.isfinite(mat)))
        scale = float(np.max(np.abs(mat))) if finite else float("nan")
        raise NumericalError(
            f"eigensolver failed (dim={mat.shape[0]}, finite={finite}, max|entry|={scale:.3e})"
        ) from exc


def trace_norm(m) -> float:
    """Sum of absolute eigenvalues of the Hermitian part of ``m``."""
    mat = m.entries if isinstance(m, FockMatrix) else np.asarray(m, dtype=complex)
    herm = 0.5 * (mat + mat.conj().T)
    return float(np.sum(np.abs(_eigh(herm))))


def _check_prior(p: float):
    if not (0.0 <= p <= 1.0):
        raise InvalidInputError(f"prior must lie in [0, 1], got {p}")


def helstrom_error(rho1: FockMatrix, rho2: FockMatrix, prior1: float = 0.5) -> float:
    """Minimum error probability for discriminating ``rho1`` from ``rho2``."""
    _same_dims(rho1, rho2)
    _check_prior(prior1)
    gamma = prior1 * rho1.entries - (1.0 - prior1) * rho2.entries
    return 0.5 * (1.0 - trace_norm(gamma))


def helstrom_projector(rho1: FockMatrix, rho2: FockMatrix, prior1: float = 0.5) -> FockMatrix:
    """Projector onto the positive eigenspace of ``p rho1 - (1-p) rho2``.

    Outcome of this projector is the decision "rho1". The kernel is assigned
    to "rho2"; either choice attains the Helstrom error.
    """
    _same_dims(rho1, rho2)
    _check_prior(prior1)
    gamma = prior1 * rho1.entries - (1.0 - prior1) * rho2.entries
    w, v = _eigh(0.5 * (gamma + gamma.conj().T), values_only=False)
    tol = 1e-13 * max(1.0, float(np.max(np.abs(w))))
    keep = v[:, w > tol]
    return FockMatrix(keep @ keep.conj().T, rho1.dims)
