"""Estimate-and-discriminate strategy.

The auxiliary copies are concentrated and measured with a (possibly squeezed)
heterodyne POVM. The outcome ``v`` in local coordinates updates the Gaussian
prior to a Gaussian posterior, and the signal is then discriminated against
the posterior-averaged state ``rho(v)``.

Conventions: Gaussian states are described by a covariance matrix with the
vacuum equal to the identity and a displacement vector ``sqrt(2) (Re a, Im a)``.
The squeezing angle is pinned to zero because ``alpha0`` is real.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .collective import (
    RiskCurvePoint,
    _check_alpha_positive,
    _lead,
    excess_risk_opt,
    helstrom_eigenstructure,
    lambda_star,
    pe_opt_finite,
    richardson,
)
from .errors import DegeneracyError, InvalidInputError, NumericalError, TruncationError
from .fock import FockMatrix, as_amplitude, coherent_vectors, poisson_cutoff, trace_norm
from .localmodel import LocalModel, gauss_hermite_2d

CHUNK = 2000


@dataclass(frozen=True)
class HeterodyneSettings:
    """Squeezing ``r`` and direction ``phi`` of the heterodyne POVM."""

    r: float = 0.0
    phi: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.r) and abs(self.r) < 20.0):
            raise InvalidInputError(f"|r| must be below 20, got {self.r}")
        if not (0.0 <= self.phi < math.pi):
            raise InvalidInputError(f"phi must lie in [0, pi), got {self.phi}")

    @property
    def t(self) -> float:
        return math.tanh(self.r)

    def noise_variances(self) -> tuple[float, float]:
        """Outcome noise variances along and across the squeezing direction."""
        t = self.t
        return 1.0 / (2.0 * (1.0 + t)), 1.0 / (2.0 * (1.0 - t))


@dataclass(frozen=True)
class GaussianMoments:
    """Posterior moments ``E[u]``, ``E[|u|^2]`` and ``E[u^2]``."""

    I1: complex
    I2: float
    I3: complex


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_error: float
    trials: int
    seed: int


def _require_real_frame(settings: HeterodyneSettings):
    if settings.phi != 0.0:
        raise InvalidInputError("real alpha0 requires phi = 0")


# --------------------------------------------------------------------------
# Gaussian-state algebra and heterodyne statistics
# --------------------------------------------------------------------------

def gaussian_overlap(VA, dA, VB, dB) -> float:
    """``tr(rho_A rho_B)`` for two single-mode Gaussian states."""
    s = np.asarray(VA, float) + np.asarray(VB, float)
    det = float(np.linalg.det(s))
    if not det > 0.0:
        raise NumericalError(f"V_A + V_B is singular (det = {det:.3e})")
    delta = np.asarray(dA, float) - np.asarray(dB, float)
    return float(2.0 / math.sqrt(det) * math.exp(-delta @ np.linalg.solve(s, delta)))


def squeezed_covariance(r: float, phi: float = 0.0, thermal: float = 0.0) -> np.ndarray:
    """Covariance of a squeezed thermal state, squeezed along angle ``phi``."""
    rot = np.array([[math.cos(phi), -math.sin(phi)], [math.sin(phi), math.cos(phi)]])
    return (2 * thermal + 1) * rot @ np.diag([math.exp(-2 * r), math.exp(2 * r)]) @ rot.T


def displacement_vector(z) -> np.ndarray:
    z = as_amplitude(z)
    return math.sqrt(2.0) * np.array([z.real, z.imag])


def heterodyne_pdf(beta_bar, alpha, n: int, settings: HeterodyneSettings):
    """Outcome density of the heterodyne POVM on ``|sqrt(n) alpha>``."""
    w = math.sqrt(n) * np.asarray(alpha, complex) - np.asarray(beta_bar, complex)
    expo = -np.abs(w) ** 2 - np.real(w**2 * np.exp(-2j * settings.phi)) * settings.t
    return np.exp(expo) / (math.pi * math.cosh(settings.r))


def sample_heterodyne(alpha, n: int, settings: HeterodyneSettings,
                      rng: np.random.Generator, size=None):
    """Draw outcomes with density :func:`heterodyne_pdf`."""
    s1, s2 = settings.noise_variances()
    x = rng.normal(0.0, math.sqrt(s1), size)
    y = rng.normal(0.0, math.sqrt(s2), size)
    return math.sqrt(n) * np.asarray(alpha, complex) + (x + 1j * y) * np.exp(1j * settings.phi)


def _posterior_params(mu: float, settings: HeterodyneSettings):
    t = settings.t
    p1 = (1.0 + t) + 1.0 / mu**2
    p2 = (1.0 - t) + 1.0 / mu**2
    return (1.0 + t) / p1, (1.0 - t) / p2, 1.0 / (2.0 * p1), 1.0 / (2.0 * p2)


def posterior_variances(mu: float, settings: HeterodyneSettings) -> tuple[float, float]:
    _require_real_frame(settings)
    return _posterior_params(mu, settings)[2:]


def local_posterior_moments(v, mu: float, settings: HeterodyneSettings) -> GaussianMoments:
    """Moments of ``p(u|v)``, a product Gaussian in (Re u, Im u)."""
    _require_real_frame(settings)
    g1, g2, s1, s2 = _posterior_params(mu, settings)
    v = np.asarray(v, complex)
    m = g1 * v.real + 1j * g2 * v.imag
    return GaussianMoments(m, np.abs(m) ** 2 + s1 + s2, m**2 + (s1 - s2))


def pv_variances(mu: float, settings: HeterodyneSettings) -> tuple[float, float]:
    """Coordinate variances of the outcome marginal ``p(v)``."""
    s1, s2 = settings.noise_variances()
    return mu**2 / 2.0 + s1, mu**2 / 2.0 + s2


def pv_pdf(v, mu: float, settings: HeterodyneSettings):
    """Marginal density of the local outcome ``v``."""
    _require_real_frame(settings)
    r = settings.r
    ch2 = math.cosh(r) ** 2
    m2 = mu * mu
    v = np.asarray(v, complex)
    pre = 1.0 / (math.pi * math.cosh(r) * math.sqrt(1.0 + m2 * (2.0 + m2 / ch2)))
    num = np.abs(v) ** 2 * (1.0 + m2 / ch2) + np.real(v**2) * math.tanh(r)
    den = m2 * m2 * math.tanh(r) ** 2 - (m2 + 1.0) ** 2
    return pre * np.exp(num / den)


def averaged_moments(mu: float, settings: HeterodyneSettings) -> tuple[float, float]:
    """``(E[I1^2], E[|I1|^2])`` over ``p(v)``, in closed form."""
    r = settings.r
    m2 = mu * mu
    den = (2 * m2 + 1) * math.cosh(2 * r) + 2 * m2 * (m2 + 1) + 1
    return m2 * m2 * math.sinh(2 * r) / den, m2 * m2 * (math.cosh(2 * r) + 2 * m2 + 1) / den


# --------------------------------------------------------------------------
# finite-n error probabilities
# --------------------------------------------------------------------------

def _signal_dim(model: LocalModel, spread: float) -> int:
    reach = model.alpha0 + spread / math.sqrt(model.n)
    return poisson_cutoff(reach**2, 1e-13, minimum=6)


def _inner_grid(mu: float, settings: HeterodyneSettings, order: int):
    g1, g2, s1, s2 = _posterior_params(mu, settings)
    return g1, g2, gauss_hermite_2d(math.sqrt(s1), math.sqrt(s2), order)


def _posterior_matrices(means: np.ndarray, n: int, dim: int, inner) -> np.ndarray:
    """``rho(v)`` for a batch of posterior means, shape (batch, dim, dim)."""
    pts = (means[:, None] + inner.nodes[None, :]) / math.sqrt(n)
    psi = coherent_vectors(pts, dim)
    return np.matmul(psi.transpose(0, 2, 1) * inner.weights, psi.conj())


def posterior_signal_state(v, model: LocalModel, settings: HeterodyneSettings,
                           dim: int | None = None, order: int = 30) -> FockMatrix:
    """Signal state averaged over the posterior ``p(u|v)``, in the displaced frame."""
    _require_real_frame(settings)
    v = as_amplitude(v)
    g1, g2, inner = _inner_grid(model.mu, settings, order)
    mean = g1 * v.real + 1j * g2 * v.imag
    if dim is None:
        spread = abs(mean) + 8.0 * max(np.abs(inner.nodes).max(), 1.0)
        dim = poisson_cutoff((spread / math.sqrt(model.n)) ** 2, 1e-13, minimum=6)
    rho = _posterior_matrices(np.array([mean]), model.n, dim, inner)[0]
    deficit = max(0.0, 1.0 - float(np.trace(rho).real))
    if deficit > 1e-6:
        raise TruncationError(f"signal cutoff {dim} loses {deficit:.3e} of the trace")
    return FockMatrix(rho, (dim,), deficit)


def _decision_gain(target: np.ndarray, rho: np.ndarray, hypothesis: np.ndarray):
    """``tr(Pi ([phi] - rho))`` with Pi built from ``[phi] - hypothesis``."""
    w, vecs = np.linalg.eigh(target[None] - hypothesis)
    keep = w >= 0.0
    diff = target[None] - rho
    proj = np.einsum("bki,bkl,bli->bi", vecs.conj(), diff, vecs).real
    return np.sum(np.where(keep, proj, 0.0), axis=1)


def pe_eand_finite(model: LocalModel, settings: HeterodyneSettings = HeterodyneSettings(),
                   dim: int | None = None, outer_order: int = 30, inner_order: int = 30,
                   receiver: str = "posterior") -> float:
    """Exact E&D error probability at finite ``n`` by nested quadrature.

    Parameters
    ----------
    model : LocalModel
    settings : HeterodyneSettings
    dim : int, optional
        Signal-mode cutoff.
    outer_order, inner_order : int
        Gauss-Hermite orders over the outcome ``v`` and the posterior ``u``.
    receiver : {"posterior", "plugin"}
        ``"posterior"`` discriminates against ``rho(v)`` (Bayes optimal);
        ``"plugin"`` tunes the receiver to ``[v/sqrt(n)]`` while the error is
        still scored against ``rho(v)``.
    """
    _require_real_frame(settings)
    if receiver not in ("posterior", "plugin"):
        raise InvalidInputError(f"unknown receiver {receiver!r}")
    sv1, sv2 = pv_variances(model.mu, settings)
    outer = gauss_hermite_2d(math.sqrt(sv1), math.sqrt(sv2), outer_order)
    g1, g2, inner = _inner_grid(model.mu, settings, inner_order)
    means = g1 * outer.nodes.real + 1j * g2 * outer.nodes.imag
    if dim is None:
        dim = _signal_dim(model, np.abs(outer.nodes).max() + np.abs(inner.nodes).max())
    phi = coherent_vectors(-model.alpha0, dim)
    target = np.outer(phi, phi.conj())
    gains = np.empty(len(means))
    for start in range(0, len(means), 64):
        sl = slice(start, start + 64)
        rho = _posterior_matrices(means[sl], model.n, dim, inner)
        if receiver == "posterior":
            hyp = rho
        else:
            z = coherent_vectors(outer.nodes[sl] / math.sqrt(model.n), dim)
            hyp = np.einsum("bk,bl->bkl", z, z.conj())
        gains[sl] = _decision_gain(target, rho, hyp)
    return float(0.5 * (1.0 - np.dot(outer.weights, gains)))


def pe_eand_asymptotic(alpha0: float, mu: float, n: int,
                       settings: HeterodyneSettings = HeterodyneSettings()) -> float:
    """E&D error probability to order ``1/n``."""
    return 0.5 * (1.0 - _lead(alpha0) + delta_eand(alpha0, mu, settings) / n)


def pe_signal_only(model: LocalModel, dim: int | None = None, order: int = 40) -> float:
    """Helstrom error that ignores the auxiliary copies entirely."""
    from .localmodel import build_quadrature

    grid = build_quadrature(model.mu, order)
    pts = grid.nodes / math.sqrt(model.n)
    if dim is None:
        dim = _signal_dim(model, np.abs(grid.nodes).max())
    psi = coherent_vectors(pts, dim)
    rho = (psi.T * grid.weights) @ psi.conj()
    phi = coherent_vectors(-model.alpha0, dim)
    return 0.5 * (1.0 - 0.5 * trace_norm(np.outer(phi, phi.conj()) - rho))


# --------------------------------------------------------------------------
# asymptotics
# --------------------------------------------------------------------------

def eand_basis(alpha0: float):
    """Orthonormal frame {|0>, |1>, |2>, w} with ``|-alpha0>`` in its span.

    Returns the coordinates of ``|-alpha0>`` in that frame.
    """
    ov = math.exp(-alpha0 * alpha0 / 2.0)
    b = np.array([ov, -alpha0 * ov, alpha0 * alpha0 * ov / math.sqrt(2.0)])
    rest = math.sqrt(max(0.0, 1.0 - float(b @ b)))
    return np.r_[b, rest]


def eand_operators(alpha0: float, moments: GaussianMoments):
    """Zero-, first- and second-order parts of ``[-alpha0] - rho(v)`` in the 4-d frame."""
    phi = eand_basis(alpha0)
    e = np.eye(4, dtype=complex)
    ket = [e[:, j] for j in range(4)]
    outer = lambda a, b: np.outer(a, b.conj())  # noqa: E731
    A = np.outer(phi, phi).astype(complex) - outer(ket[0], ket[0])
    B = -(moments.I1 * outer(ket[1], ket[0]) + np.conj(moments.I1) * outer(ket[0], ket[1]))
    C = (-moments.I2 * (outer(ket[1], ket[1]) - outer(ket[0], ket[0]))
         - (moments.I3 * outer(ket[2], ket[0]) + np.conj(moments.I3) * outer(ket[0], ket[2]))
         / math.sqrt(2.0))
    return A, B, C


def kernel_one_weights(alpha0: float) -> tuple[float, float]:
    """Squared ``|1>`` components of the two kernel vectors.

    The kernel of the zero-order operator in the 4-d frame is spanned by two
    vectors orthogonal to ``|0>`` and ``|-alpha0>``; the orientation with the
    first one orthogonal to ``|2>`` gives these weights. Only their sum enters
    the trace norm.
    """
    p0, p1, p2 = eand_basis(alpha0)[:3] ** 2
    rest = 1.0 - p0 - p2
    return 1.0 - p1 / rest, p1 * p2 / ((1.0 - p0) * rest)


def delta_eand(alpha0: float, mu: float,
               settings: HeterodyneSettings = HeterodyneSettings()) -> float:
    """``1/n`` coefficient (times 2) of the E&D error probability.

    Nonzero eigenvalues take the sum-over-states correction with the
    outcome-averaged moments; the kernel contributes through the rank-one
    effective operator ``-(Var1 + Var2) P0 |1><1| P0``.
    """
    if alpha0 == 0.0:
        raise DegeneracyError("E&D expansion is degenerate at alpha0 = 0")
    _check_alpha_positive(alpha0)
    _require_real_frame(settings)
    _, _, o = helstrom_eigenstructure(alpha0)
    e_sq, e_abs = averaged_moments(mu, settings)
    s = o.eigenvalue
    z = {+1: o.zero_plus, -1: o.zero_minus}
    one = {+1: o.one_plus, -1: o.one_minus}
    kernel = sum(kernel_one_weights(alpha0))
    total = 0.0
    for k in (+1, -1):
        j = -k
        lam = mu * mu * (z[k] ** 2 - one[k] ** 2)
        a = one[j] * z[k]
        b = z[j] * one[k]
        lam += (e_abs * (a * a + b * b) + 2.0 * e_sq * a * b) / (2.0 * k * s)
        lam += e_abs * kernel * z[k] ** 2 / (k * s)
        total += k * lam
    v1, v2 = posterior_variances(mu, settings)
    total += (v1 + v2) * kernel
    return -0.5 * total


def delta_eand_numeric(alpha0: float, mu: float,
                       settings: HeterodyneSettings = HeterodyneSettings(),
                       order: int = 4) -> float:
    """Same coefficient via the generic trace-norm expansion, averaged over ``v``.

    The second-order coefficient is quadratic in ``v``, so a low-order
    Gauss-Hermite rule over ``p(v)`` is exact.
    """
    from .collective import trace_norm_expansion

    sv1, sv2 = pv_variances(mu, settings)
    grid = gauss_hermite_2d(math.sqrt(sv1), math.sqrt(sv2), order)
    t2 = 0.0
    for v, w in zip(grid.nodes, grid.weights):
        A, B, C = eand_operators(alpha0, local_posterior_moments(v, mu, settings))
        t2 += w * trace_norm_expansion(A, B, C)[2]
    return -0.5 * t2


def excess_risk_eand(alpha0: float, r: float) -> float:
    """E&D excess risk at squeezing ``r`` in the flat-prior limit."""
    _check_alpha_positive(alpha0)
    a = alpha0 * alpha0
    em1 = math.expm1(a)
    ea = math.exp(a)
    s = math.sqrt(-math.expm1(-a))
    # 4 e^a (1 - e^a)(s - 1) rewritten as 4 (e^a - 1)/(1 + s)
    bcoef = 4.0 * em1 / (1.0 + s) + a * (4.0 * ea * s - 2.0)
    return (bcoef * math.cosh(r) ** 2 + a * math.sinh(2.0 * r)) / (16.0 * s * em1 * ea)


def _f_coefficient(alpha0: float) -> float:
    a = alpha0 * alpha0
    em1 = math.expm1(a)
    s = math.sqrt(-math.expm1(-a))
    return -2.0 * em1 / (1.0 + s) + a * (1.0 - 2.0 * math.exp(a) * s)


def optimal_squeezing(alpha0: float) -> float:
    """Squeezing that minimises :func:`excess_risk_eand`."""
    _check_alpha_positive(alpha0)
    a = alpha0 * alpha0
    f = _f_coefficient(alpha0)
    if not (f - a < 0.0 and f + a < 0.0):
        raise NumericalError(f"squeezing formula out of domain at alpha0={alpha0}")
    return 0.25 * math.log1p(2.0 * a / (f - a))


def quadrature_weights(alpha0: float) -> tuple[float, float]:
    """``(g_q, g_p)`` of the risk ``g_q E(dq^2) + g_p E(dp^2) + const``.

    Read off by fitting ``c0 + P e^{2r} + Q e^{-2r}`` to three evaluations
    of :func:`excess_risk_eand`; the quadrature noise variances scale as
    ``(1 + e^{-+2r})/4``.
    """
    rs = np.array([-0.5, 0.0, 0.5])
    rows = np.column_stack([np.ones(3), np.exp(2 * rs), np.exp(-2 * rs)])
    vals = np.array([excess_risk_eand(alpha0, r) for r in rs])
    _, p, q = np.linalg.solve(rows, vals)
    return 4.0 * q, 4.0 * p


def excess_risk_eand_min(alpha0: float) -> float:
    return excess_risk_eand(alpha0, optimal_squeezing(alpha0))


def excess_risk_eand_finite_mu(alpha0: float, mu: float,
                               settings: HeterodyneSettings = HeterodyneSettings()) -> float:
    return delta_eand(alpha0, mu, settings) / 2.0 - lambda_star(alpha0, mu) / 2.0


def excess_risk_eand_at_n(model: LocalModel, settings: HeterodyneSettings, **kw) -> float:
    """``n (P_E&D - P_star)`` at the model's finite ``n``."""
    from .collective import pe_star

    pe = pe_eand_finite(model, settings, **kw)
    return model.n * (pe - pe_star(model.alpha0, model.mu, model.n, "finite", 60))


def excess_risk_eand_extrapolated(alpha0: float, mu: float, n: int,
                                  settings: HeterodyneSettings = HeterodyneSettings(),
                                  **kw) -> float:
    f1 = excess_risk_eand_at_n(LocalModel(alpha0, mu, n), settings, **kw)
    f4 = excess_risk_eand_at_n(LocalModel(alpha0, mu, 4 * n), settings, **kw)
    return richardson(f1, f4)


def risk_curve_point(alpha0: float) -> RiskCurvePoint:
    return RiskCurvePoint(alpha0, excess_risk_opt(alpha0), excess_risk_eand_min(alpha0),
                          optimal_squeezing(alpha0))


# --------------------------------------------------------------------------
# Monte Carlo
# --------------------------------------------------------------------------

def _mc_chunk(args):
    model, settings, count, seed_seq, receiver, rao_blackwell, dim, inner_order = args
    rng = np.random.default_rng(seed_seq)
    mu = model.mu
    u = rng.normal(0.0, mu / math.sqrt(2.0), count) + 1j * rng.normal(0.0, mu / math.sqrt(2.0), count)
    # outcome in local coordinates: v = beta_bar - sqrt(n) alpha0
    v = sample_heterodyne(u / math.sqrt(model.n), model.n, settings, rng, count)
    g1, g2, inner = _inner_grid(mu, settings, inner_order)
    means = g1 * v.real + 1j * g2 * v.imag
    phi = coherent_vectors(-model.alpha0, dim)
    target = np.outer(phi, phi.conj())
    truth = coherent_vectors(u / math.sqrt(model.n), dim)
    if receiver == "posterior":
        hyp = _posterior_matrices(means, model.n, dim, inner)
    else:
        z = coherent_vectors(v / math.sqrt(model.n), dim)
        hyp = np.einsum("bk,bl->bkl", z, z.conj())
    w, vecs = np.linalg.eigh(target[None] - hyp)
    keep = w >= 0.0
    p_phi = np.abs(np.einsum("bki,k->bi", vecs.conj(), phi)) ** 2
    p_true = np.abs(np.einsum("bki,bk->bi", vecs.conj(), truth)) ** 2
    # Pi decides "vacuum signal", i.e. the [-alpha0] hypothesis in this frame
    miss = 1.0 - np.sum(np.where(keep, p_phi, 0.0), axis=1)
    false = np.sum(np.where(keep, p_true, 0.0), axis=1)
    if rao_blackwell:
        err = 0.5 * (miss + false)
    else:
        first = rng.random(count) < 0.5
        draw = rng.random(count)
        err = np.where(first, draw < miss, draw < false).astype(float)
    return float(err.sum()), float(np.sum(err * err))


def montecarlo_eand(model: LocalModel, settings: HeterodyneSettings = HeterodyneSettings(),
                    trials: int = 100_000, seed: int = 0, receiver: str = "posterior",
                    rao_blackwell: bool = True, workers: int = 1, dim: int | None = None,
                    inner_order: int = 10) -> McEstimate:
    """Monte Carlo estimate of the E&D error probability.

    Each trial draws ``u`` from the prior and a heterodyne outcome, builds the
    receiver, and records the exact conditional error (or, with
    ``rao_blackwell=False``, a sampled 0/1 error). Trials are split into
    fixed-size chunks with independent child seeds, so the result does not
    depend on ``workers``.
    """
    _require_real_frame(settings)
    if trials < 1000:
        raise InvalidInputError("at least 1000 trials are required")
    if receiver not in ("posterior", "plugin"):
        raise InvalidInputError(f"unknown receiver {receiver!r}")
    if dim is None:
        spread = 8.0 * model.mu + 8.0
        dim = _signal_dim(model, spread)
    sizes = [CHUNK] * (trials // CHUNK) + ([trials % CHUNK] if trials % CHUNK else [])
    seeds = np.random.SeedSequence(seed).spawn(len(sizes))
    jobs = [(model, settings, c, s, receiver, rao_blackwell, dim, inner_order)
            for c, s in zip(sizes, seeds)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_mc_chunk, jobs))
    else:
        parts = [_mc_chunk(j) for j in jobs]
    total = sum(p[0] for p in parts)
    total_sq = sum(p[1] for p in parts)
    mean = total / trials
    var = max(0.0, (total_sq - trials * mean * mean) / (trials - 1))
    return McEstimate(mean, math.sqrt(var / trials), trials, int(seed))


def default_workers() -> int:
    return max(1, len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else os.cpu_count() or 1)
