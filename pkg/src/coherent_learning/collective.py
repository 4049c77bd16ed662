"""Collective (joint-measurement) strategy.

Exact finite-n Helstrom errors, a second-order eigenvalue perturbation engine,
closed-form asymptotic coefficients and the excess risk relative to knowing
the amplitude.

The default finite-n backend never builds a two-mode Fock matrix. The averaged
second state is a beam-splitter image of a thermal state in one mode and
vacuum in the other, so both averaged states are diagonal in explicit families
of product vectors. The difference operator lives in their span, whose Gram
matrix is banded; a banded Cholesky factor turns the trace norm into a banded
symmetric eigenproblem. This reaches prior widths where the auxiliary cutoff
runs to several thousand photons.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.linalg import LinAlgError, cholesky_banded, eigvals_banded
from scipy.special import gammaln

from .errors import DegeneracyError, InvalidInputError, NumericalError, TruncationError
from .fock import FockKet, coherent_vectors, helstrom_error, thermal_cutoff
from .localmodel import (
    DEFAULT_ORDER,
    LocalModel,
    averaged_sigma1,
    averaged_sigma2,
    build_quadrature,
    default_dims,
)

SUBSPACE_TAIL = 1e-10


# --------------------------------------------------------------------------
# perturbation engine
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PerturbationResult:
    """Eigenvalue corrections for ``A + eps B + eps^2 C``.

    Entries follow the ascending order of ``zero_order``.
    """

    zero_order: np.ndarray
    first_order: np.ndarray
    second_order: np.ndarray

    def eigenvalues(self, eps: float) -> np.ndarray:
        return self.zero_order + eps * self.first_order + eps**2 * self.second_order


def _as_array(m) -> np.ndarray:
    return np.asarray(getattr(m, "entries", m), dtype=complex)


def _clusters(w: np.ndarray, tol: float) -> list[np.ndarray]:
    groups, start = [], 0
    for i in range(1, len(w) + 1):
        if i == len(w) or w[i] - w[i - 1] > tol:
            groups.append(np.arange(start, i))
            start = i
    return groups


def second_order_perturbation(A, B, C, gap_tol: float = 1e-12,
                              allow_degenerate: bool = False) -> PerturbationResult:
    """Rayleigh-Schrodinger corrections up to second order.

    Parameters
    ----------
    A, B, C : FockMatrix or ndarray
        Hermitian zero-, first- and second-order operators.
    gap_tol : float
        Eigenvalues of ``A`` closer than this count as degenerate.
    allow_degenerate : bool
        If false, a degenerate spectrum raises :class:`DegeneracyError`.
        If true, each degenerate cluster is handled by diagonalising the
        first-order block; the second-order values then come from the
        effective operator ``P C P + P B Q (g - A)^-1 Q B P`` in that cluster,
        which is exact when the first-order block vanishes.

    Returns
    -------
    PerturbationResult
    """
    a, b, c = _as_array(A), _as_array(B), _as_array(C)
    if not (a.shape == b.shape == c.shape):
        raise InvalidInputError("A, B and C must share a shape")
    w, u = np.linalg.eigh(0.5 * (a + a.conj().T))
    bp = u.conj().T @ b @ u
    cp = u.conj().T @ c @ u
    groups = _clusters(w, gap_tol)
    bad = [g for g in groups if len(g) > 1]
    if bad and not allow_degenerate:
        raise DegeneracyError(f"degenerate zero-order eigenvalues at indices {bad[0].tolist()}")

    first = np.zeros(len(w))
    second = np.zeros(len(w))
    for g in groups:
        rest = np.setdiff1d(np.arange(len(w)), g)
        gam = w[g].mean()
        denom = gam - w[rest]
        block_b = bp[np.ix_(g, g)]
        couple = bp[np.ix_(g, rest)]
        eff = cp[np.ix_(g, g)] + (couple / denom) @ couple.conj().T
        if len(g) == 1:
            first[g] = block_b.real.ravel()
            second[g] = eff.real.ravel()
            continue
        f, v = np.linalg.eigh(block_b)
        first[g] = f
        if np.max(np.abs(f)) < gap_tol:
            second[g] = np.linalg.eigvalsh(eff)
        else:
            second[g] = np.real(np.einsum("ij,ik,kj->j", v.conj(), eff, v))
    return PerturbationResult(w, first, second)


def trace_norm_expansion(A, B, C, tol: float = 1e-10) -> tuple[float, float, float]:
    """Coefficients of ``||A + eps B + eps^2 C||_1`` to second order.

    Nonzero eigenvalue clusters contribute with the sign of their zero-order
    value. The kernel of ``A`` contributes at first order through
    ``||P B P||_1`` and, when that block vanishes, at second order through the
    trace norm of the effective operator ``P C P - P B Q A^+ Q B P``.
    """
    a, b, c = _as_array(A), _as_array(B), _as_array(C)
    w, u = np.linalg.eigh(0.5 * (a + a.conj().T))
    bp = u.conj().T @ b @ u
    cp = u.conj().T @ c @ u
    zero = np.abs(w) <= tol
    t0 = float(np.sum(np.abs(w)))
    t1 = t2 = 0.0
    for g in _clusters(w, tol):
        if zero[g[0]]:
            continue
        s = math.copysign(1.0, w[g[0]])
        rest = np.setdiff1d(np.arange(len(w)), g)
        couple = bp[np.ix_(g, rest)]
        eff = cp[np.ix_(g, g)] + (couple / (w[g[0]] - w[rest])) @ couple.conj().T
        t1 += s * float(np.trace(bp[np.ix_(g, g)]).real)
        t2 += s * float(np.trace(eff).real)
    z = np.flatnonzero(zero)
    if z.size:
        nz = np.flatnonzero(~zero)
        pbp = bp[np.ix_(z, z)]
        t1 += float(np.sum(np.abs(np.linalg.eigvalsh(pbp))))
        if np.max(np.abs(pbp)) > tol:
            raise NumericalError("kernel block of B is nonzero; expansion is not analytic")
        couple = bp[np.ix_(z, nz)]
        eff = cp[np.ix_(z, z)] - (couple / w[nz]) @ couple.conj().T
        t2 += float(np.sum(np.abs(np.linalg.eigvalsh(eff))))
    return t0, t1, t2


# --------------------------------------------------------------------------
# eigenstructure of [-alpha0] - [0] and closed forms
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class HelstromOverlaps:
    """Overlaps of the eigenvectors of ``[-alpha0] - [0]`` with Fock states.

    ``zero_*`` and ``one_*`` are signed amplitudes; ``one_kernel`` is the
    squared weight of ``|1>`` orthogonal to the two-dimensional support.
    """

    eigenvalue: float
    n_plus: float
    n_minus: float
    zero_plus: float
    zero_minus: float
    one_plus: float
    one_minus: float
    one_kernel: float

    @property
    def zero_plus_sq(self) -> float:
        return self.zero_plus**2

    @property
    def zero_minus_sq(self) -> float:
        return self.zero_minus**2


def _check_alpha_positive(alpha0: float):
    if not (math.isfinite(alpha0) and alpha0 > 0.0):
        raise InvalidInputError(f"alpha0 must be positive, got {alpha0}")


def helstrom_eigenstructure(alpha0: float, dim: int | None = None):
    """Eigenvectors of ``[-alpha0] - [0]`` for the eigenvalues ``+-s``.

    Parameters
    ----------
    alpha0 : float
        Positive real amplitude.
    dim : int, optional
        Fock cutoff of the returned kets.

    Returns
    -------
    v_plus, v_minus : FockKet
    overlaps : HelstromOverlaps
    """
    if alpha0 == 0.0:
        raise DegeneracyError("alpha0 = 0 makes the two states identical")
    _check_alpha_positive(alpha0)
    a = alpha0 * alpha0
    ov = math.exp(-a / 2.0)
    n_p, n_m = math.sqrt(1.0 + ov), math.sqrt(1.0 - ov)
    s = math.sqrt(-math.expm1(-a))
    if dim is None:
        dim = max(8, int(a + 12.0 * alpha0 + 20))
    phi = coherent_vectors(-alpha0, dim)
    vac = np.zeros(dim)
    vac[0] = 1.0
    sym = (phi + vac) / n_p
    anti = (phi - vac) / n_m
    v_plus, v_minus = 0.5 * (sym + anti), 0.5 * (sym - anti)
    one = -alpha0 * ov
    ovl = HelstromOverlaps(
        eigenvalue=s, n_plus=n_p, n_minus=n_m,
        zero_plus=0.5 * (n_p - n_m), zero_minus=0.5 * (n_p + n_m),
        one_plus=0.5 * one * (1.0 / n_p + 1.0 / n_m),
        one_minus=0.5 * one * (1.0 / n_p - 1.0 / n_m),
        one_kernel=1.0 - a * math.exp(-a) / s**2,
    )
    deficit = max(0.0, 1.0 - float(np.vdot(v_plus, v_plus).real))
    return (FockKet(v_plus, deficit), FockKet(v_minus, max(0.0, 1.0 - float(np.vdot(v_minus, v_minus).real))),
            ovl)


def lambda2_pm(alpha0: float, mu: float) -> tuple[float, float]:
    """Closed-form summed second-order corrections ``(L+, L-)``."""
    if alpha0 == 0.0:
        raise DegeneracyError("closed form is singular at alpha0 = 0")
    _check_alpha_positive(alpha0)
    a = alpha0 * alpha0
    em1 = math.expm1(a)
    m2 = mu * mu
    val = (m2 * math.exp(-a / 2.0) / (2.0 * math.sqrt(em1))
           * (1.0 - (m2 + 1.0) / (2.0 * m2 + 1.0) * a * (2.0 * em1 + 1.0) / em1))
    return val, -val


def lambda2_series(alpha0: float, mu: float, i_max: int | None = None, rtol: float = 1e-14):
    """Sum of per-level second-order corrections, level by level.

    Independent of :func:`lambda2_pm`; used as its oracle. Each level ``i``
    carries eigenvalues ``c_i (+s, -s, 0)`` coupled to levels ``i -+ 1``.
    By default enough levels are kept for the thermal weights to fall
    below ``1e-20`` of the first.
    """
    if i_max is None:
        i_max = 50 + int(math.ceil(46.0 / math.log1p(1.0 / mu**2)))
    _, _, o = helstrom_eigenstructure(alpha0)
    s = o.eigenvalue
    c = np.exp(np.arange(i_max + 2) * (np.log(mu**2) - np.log1p(mu**2)) - np.log1p(mu**2))
    i = np.arange(i_max + 2)
    d = c * np.sqrt(i)                  # coupling (i) -> (i - 1)
    dt = np.r_[d[1:], 0.0]              # coupling (i) -> (i + 1)
    e = np.r_[c[1:] * i[1:], 0.0]
    z = {+1: o.zero_plus, -1: o.zero_minus}
    one = {+1: o.one_plus, -1: o.one_minus}
    one_sq = {+1: o.one_plus**2, -1: o.one_minus**2, 0: o.one_kernel}
    zero_sq = {+1: o.zero_plus**2, -1: o.zero_minus**2, 0: 0.0}
    out = {}
    for sign in (+1, -1):
        total = 0.0
        for k in range(i_max + 1):
            g = sign * c[k] * s
            term = e[k] * (z[sign] ** 2 - one[sign] ** 2)
            for eps in (+1, -1, 0):
                if k >= 1:
                    gap = g - eps * c[k - 1] * s
                    term += d[k] ** 2 * zero_sq[sign] * one_sq[eps] / gap
                gap = g - eps * c[k + 1] * s
                term += dt[k] ** 2 * one_sq[sign] * zero_sq[eps] / gap
            total += term
            if k > 5 and abs(term) < rtol * abs(total):
                break
        out[sign] = total
    return out[+1], out[-1]


def _lead(alpha0: float) -> float:
    return math.sqrt(-math.expm1(-alpha0 * alpha0))


def pe_opt_asymptotic(alpha0: float, mu: float, n: int) -> float:
    """Collective error probability to order ``1/n``."""
    lp, lm = lambda2_pm(alpha0, mu)
    return 0.5 * (1.0 - _lead(alpha0) - (lp - lm) / (2.0 * n))


def lambda_star(alpha0: float, mu: float) -> float:
    """``1/n`` coefficient (times 2) of the error when the amplitude is known."""
    if alpha0 == 0.0:
        raise DegeneracyError("expansion is singular at alpha0 = 0")
    _check_alpha_positive(alpha0)
    a = alpha0 * alpha0
    ea = math.exp(-a)
    num = mu * mu * (2.0 * (ea - 1.0) + a * (2.0 - ea))
    return num / (4.0 * math.expm1(a) * _lead(alpha0))


def pe_star(alpha0: float, mu: float, n: int, mode: str = "finite",
            order: int = DEFAULT_ORDER) -> float:
    """Average error when the true amplitude is revealed to the receiver.

    ``mode="finite"`` integrates the exact pure-state Helstrom error over the
    prior; ``mode="asymptotic"`` uses the ``1/n`` expansion.
    """
    if not (alpha0 >= 0.0):
        raise InvalidInputError(f"alpha0 must be nonnegative, got {alpha0}")
    if mode == "asymptotic":
        return 0.5 * (1.0 - _lead(alpha0) + lambda_star(alpha0, mu) / n)
    if mode != "finite":
        raise InvalidInputError(f"unknown mode {mode!r}")
    grid = build_quadrature(mu, order)
    amp = alpha0 + grid.nodes / math.sqrt(n)
    vals = 0.5 * (1.0 - np.sqrt(-np.expm1(-np.abs(amp) ** 2)))
    return float(np.dot(grid.weights, vals))


def excess_risk_opt(alpha0: float) -> float:
    """Collective excess risk in the flat-prior limit."""
    if not (math.isfinite(alpha0) and alpha0 > 0.0):
        raise InvalidInputError(f"alpha0 must be positive, got {alpha0}")
    a = alpha0 * alpha0
    em1 = math.expm1(a)
    # e^{-a/2} (2e^a - 1) / (e^a - 1)^{3/2}, arranged to avoid overflow
    return a * (2.0 * math.exp(a / 2.0) - math.exp(-a / 2.0)) / (16.0 * em1 * math.sqrt(em1))


def excess_risk_opt_finite_mu(alpha0: float, mu: float) -> float:
    """Collective excess risk at finite prior width ``mu``."""
    lp, lm = lambda2_pm(alpha0, mu)
    return -(lp - lm) / 4.0 - lambda_star(alpha0, mu) / 2.0


def richardson(f_n: float, f_4n: float, ratio: float = 4.0) -> float:
    """Eliminate the ``1/n`` term from values at ``n`` and ``ratio * n``."""
    return (ratio * f_4n - f_n) / (ratio - 1.0)


# --------------------------------------------------------------------------
# exact finite-n error
# --------------------------------------------------------------------------

def _log_thermal(m2: float, dim: int) -> np.ndarray:
    k = np.arange(dim)
    return k * (math.log(m2) - math.log1p(m2)) - math.log1p(m2)


def _cross_gram(alpha0: float, n: int, dim: int, cut: float = 1e-18):
    """Overlaps between the two product families, as a banded sparse matrix.

    Entry (k, k + d) is ``<k| <phi| . W^dag |k+d, 0>`` with ``phi = |-alpha0>``.
    """
    log_t = math.log(n / (n + 1.0))
    log_r = -math.log(n + 1.0)
    k = np.arange(dim)
    rows, cols, vals = [], [], []
    a = alpha0 * alpha0
    for d in range(dim):
        kk = k[: dim - d]
        if alpha0 == 0.0 and d > 0:
            break
        log_amp = d * math.log(alpha0) if d else 0.0
        logv = (0.5 * (gammaln(kk + d + 1.0) - gammaln(kk + 1.0) - gammaln(d + 1.0))
                + 0.5 * kk * log_t + 0.5 * d * log_r - a / 2.0 + log_amp - 0.5 * gammaln(d + 1.0))
        v = np.exp(logv)
        if d > 0 and v.max() < cut:
            break
        rows.append(kk)
        cols.append(kk + d)
        vals.append(v * (-1.0) ** d)
    bw = len(vals) - 1
    m = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(dim, dim))
    return m, bw


def _to_band(mat: sp.spmatrix, kd: int) -> np.ndarray:
    coo = mat.tocoo()
    low = coo.row >= coo.col
    ab = np.zeros((kd + 1, mat.shape[0]))
    ab[coo.row[low] - coo.col[low], coo.col[low]] = coo.data[low]
    return ab


def collective_trace_norm(alpha0: float, mu: float, n: int, dim: int | None = None,
                          shift: float = 1e-14) -> float:
    """``||sigma1 - sigma2||_1`` for the averaged states, by subspace reduction.

    Both states are mixtures of known product vectors: ``|k>|phi>`` with
    thermal weights for the first, beam-splitter images of ``|k>|0>`` with
    rescaled thermal weights for the second. The two families overlap along a
    shared coherent direction, which makes the Gram matrix exactly singular;
    a diagonal shift, raised until the Cholesky succeeds, regularises it and
    perturbs the result by about the shift size.
    """
    m2 = mu * mu
    m2b = m2 * (n + 1.0) / n
    if dim is None:
        dim = thermal_cutoff(m2b, SUBSPACE_TAIL, minimum=8)
    c1 = np.exp(_log_thermal(m2, dim))
    c2 = np.exp(_log_thermal(m2b, dim))
    cross, bw = _cross_gram(alpha0, n, dim)
    bw = max(1, min(bw, dim - 1))
    size = 2 * dim
    perm = np.r_[np.arange(0, size, 2), np.arange(1, size, 2)]
    block = sp.bmat([[sp.identity(dim), cross], [cross.T, sp.identity(dim)]]).tocsr()
    p = sp.csr_matrix((np.ones(size), (perm, np.arange(size))), shape=(size, size))
    gram = (p @ block @ p.T).tocsr()
    kd = min(2 * bw + 1, size - 1)
    ab = _to_band(gram, kd)
    weights = np.empty(size)
    weights[0::2] = c1
    weights[1::2] = -c2

    eps = shift
    while True:
        trial = ab.copy()
        trial[0] += eps
        try:
            lower = cholesky_banded(trial, lower=True)
            break
        except LinAlgError:
            eps *= 10.0
            if eps > 1e-9:
                raise NumericalError(
                    f"Gram factorisation failed (alpha0={alpha0}, mu={mu}, n={n}, dim={dim})")
    r, cidx, v = [], [], []
    for i in range(kd + 1):
        j = np.arange(size - i)
        r.append(j + i)
        cidx.append(j)
        v.append(lower[i, : size - i])
    lmat = sp.csr_matrix((np.concatenate(v), (np.concatenate(r), np.concatenate(cidx))),
                         shape=(size, size))
    h = lmat.T @ sp.diags(weights) @ lmat
    eig = eigvals_banded(_to_band(h, kd), lower=True)
    return float(np.sum(np.abs(eig)))


def pe_opt_finite(model: LocalModel, dims=None, method: str = "subspace",
                  order: int = DEFAULT_ORDER) -> float:
    """Exact collective error probability at finite ``n``.

    Parameters
    ----------
    model : LocalModel
    dims : tuple of int, optional
        ``(aux, signal)`` cutoffs for ``method="fock"``; for
        ``method="subspace"`` only the first entry is used.
    method : {"subspace", "fock"}
        ``"fock"`` builds both averaged states as dense two-mode matrices and
        is practical only for ``mu`` of order one.
    order : int
        Quadrature order of the Fock backend.
    """
    if method == "fock":
        dims = tuple(dims) if dims is not None else default_dims(model)
        s1 = averaged_sigma1(model, dims)
        s2 = averaged_sigma2(model, dims, order)
        return helstrom_error(s1, s2, 0.5)
    if method != "subspace":
        raise InvalidInputError(f"unknown method {method!r}")
    dim = None
    if dims is not None:
        dim = int(dims[0])
        tail = math.exp(dim * (math.log(model.mu**2) - math.log1p(model.mu**2)))
        if tail > 1e-4:
            raise TruncationError(f"auxiliary cutoff {dim} loses {tail:.3e} of the trace")
    tn = collective_trace_norm(model.alpha0, model.mu, model.n, dim)
    return 0.5 * (1.0 - 0.5 * tn)


def excess_risk_opt_at_n(model: LocalModel, order: int = 60) -> float:
    """``n (P_opt - P_star)`` at the model's finite ``n``."""
    pe = pe_opt_finite(model)
    ps = pe_star(model.alpha0, model.mu, model.n, "finite", order)
    return model.n * (pe - ps)


def excess_risk_opt_extrapolated(alpha0: float, mu: float, n: int) -> float:
    """Richardson estimate of the collective excess risk from ``n`` and ``4n``."""
    f1 = excess_risk_opt_at_n(LocalModel(alpha0, mu, n))
    f4 = excess_risk_opt_at_n(LocalModel(alpha0, mu, 4 * n))
    return richardson(f1, f4)


@dataclass(frozen=True)
class RiskCurvePoint:
    """Excess risks of both strategies and the optimal squeezing at one amplitude."""

    alpha0: float
    r_opt: float
    r_eand: float
    r_star: float

    @property
    def ratio(self) -> float:
        return self.r_eand / self.r_opt
