import math

import numpy as np
import pytest
from scipy.integrate import quad

from coherent_learning.errors import InvalidInputError, TruncationError
from coherent_learning.fock import coherent_vectors, partial_trace, trace_norm
from coherent_learning.localmodel import (
    LocalModel,
    averaged_sigma1,
    averaged_sigma2,
    build_quadrature,
    gaussian_prior_pdf,
    sigma2_expansion_terms,
    thermal_coefficients,
)


def test_model_validation():
    for bad in ((-1.0, 1.0, 1), (1.0, 0.0, 1), (1.0, 1.0, 0)):
        with pytest.raises(InvalidInputError):
            LocalModel(*bad)


def test_prior_pdf():
    assert gaussian_prior_pdf(0.0, 1.0) == pytest.approx(1 / math.pi, abs=1e-15)
    with pytest.raises(InvalidInputError):
        gaussian_prior_pdf(0.0, 0.0)


def test_prior_normalisation_and_second_moment():
    # independent radial integral
    total, _ = quad(lambda r: 2 * math.pi * r * gaussian_prior_pdf(r, 2.0), 0, np.inf,
                    epsabs=1e-13)
    assert abs(total - 1.0) < 1e-10
    g = build_quadrature(1.5, 40)
    assert abs(np.dot(g.weights, np.abs(g.nodes) ** 2) - 2.25) < 1e-8


def test_quadrature_basic_moments():
    g = build_quadrature(1.0, 40)
    assert abs(g.weights.sum() - 1.0) < 1e-13
    assert abs(np.dot(g.weights, 2 * g.nodes.real)) < 1e-12
    assert abs(np.dot(g.weights, (2 * g.nodes.real) ** 2) - 2.0) < 1e-10
    with pytest.raises(InvalidInputError):
        build_quadrature(1.0, 1)


def test_thermal_coefficients():
    c = thermal_coefficients(1.0, 3)
    assert np.allclose(c, [0.5, 0.25, 0.125], atol=1e-15)
    c = thermal_coefficients(2.0, 400)
    assert abs(np.dot(np.arange(400), c) - 4.0) < 1e-8
    assert abs(1 - thermal_coefficients(2.0, 50).sum() - 0.8**50) < 1e-14


def _gaussian_moment(power_u, power_ubar, mu, dim, order=40):
    g = build_quadrature(mu, order)
    psi = coherent_vectors(g.nodes, dim)
    w = g.weights * g.nodes**power_u * np.conj(g.nodes) ** power_ubar
    return (psi.T * w) @ psi.conj()


def test_prior_ladder_identities():
    """Prior-weighted moments of [u] reduce to thermal ladders."""
    mu, dim = 1.0, 60
    c = thermal_coefficients(mu, dim + 2)
    k = np.arange(dim)
    # sum_k c_(k+1) sqrt(k+1) |k><k+1|
    one = np.zeros((dim, dim))
    one[k[:-1], k[:-1] + 1] = c[1:dim] * np.sqrt(k[:-1] + 1)
    two = np.zeros((dim, dim))
    two[k[:-2], k[:-2] + 2] = c[2:dim] * np.sqrt((k[:-2] + 1) * (k[:-2] + 2))
    diag = np.diag(c[1 : dim + 1] * (k + 1))
    checks = {
        (1, 0): one, (0, 1): one.T, (1, 1): diag, (2, 0): two, (0, 2): two.T,
    }
    for (p, q), expected in checks.items():
        got = _gaussian_moment(p, q, mu, dim)
        assert np.max(np.abs(got - expected)) < 1e-8, (p, q)


def test_sigma1_structure():
    m = LocalModel(1.0, 1.0, 10)
    s1 = averaged_sigma1(m, (30, 20))
    first = partial_trace(s1, 0).entries
    assert np.max(np.abs(np.diag(first) - thermal_coefficients(1.0, 30))) < 1e-12
    assert np.max(np.abs(first - np.diag(np.diag(first)))) < 1e-12
    phi = coherent_vectors(-1.0, 20)
    second = partial_trace(s1, 1).entries / (1 - 0.5**30)
    assert np.max(np.abs(second - np.outer(phi, phi))) < 1e-12


def test_sigma1_small_prior_is_vacuum():
    s1 = averaged_sigma1(LocalModel(1.0, 1e-3, 10), (5, 20))
    assert partial_trace(s1, 0).entries[0, 0].real > 1 - 1e-5


def test_sigma1_matches_quadrature():
    m = LocalModel(1.0, 1.0, 10)
    g = build_quadrature(1.0, 40)
    a = coherent_vectors(g.nodes, 30)
    phi = coherent_vectors(-1.0, 12)
    aux = (a.T * g.weights) @ a.conj()
    direct = np.kron(aux, np.outer(phi, phi))
    assert np.max(np.abs(direct - averaged_sigma1(m, (30, 12)).entries)) < 1e-8


def test_truncation_error_is_hard():
    with pytest.raises(TruncationError):
        averaged_sigma1(LocalModel(1.0, 4.0, 10), (5, 20))


def test_sigma2_properties():
    m = LocalModel(1.0, 1.0, 100)
    s1 = averaged_sigma1(m, (30, 20))
    s2 = averaged_sigma2(m, (30, 20))
    assert s2.is_density()
    assert abs(s2.trace().real - (1 - s2.trace_deficit)) < 1e-10
    diff = partial_trace(s1, 0).entries - partial_trace(s2, 0).entries
    assert np.max(np.abs(diff)) < 1e-10
    first = partial_trace(s2, 0).entries
    assert np.max(np.abs(first - np.diag(np.diag(first)))) < 1e-12


def test_sigma2_large_n_signal_is_vacuum():
    s2 = averaged_sigma2(LocalModel(1.0, 1.0, 10**8), (30, 6))
    assert partial_trace(s2, 1).entries[0, 0].real > 1 - 1e-6


def test_sigma2_quadrature_converged():
    m = LocalModel(1.0, 1.0, 100)
    a = averaged_sigma2(m, (30, 20), order=40).entries
    b = averaged_sigma2(m, (30, 20), order=80).entries
    assert np.max(np.abs(a - b)) < 1e-10


def test_expansion_terms():
    n = 10**4
    m = LocalModel(1.0, 1.0, n)
    dims = (30, 12)
    s0, s1, s2 = sigma2_expansion_terms(m, dims)
    c = thermal_coefficients(1.0, 30)
    vac = np.zeros((12, 12))
    vac[0, 0] = 1.0
    assert np.max(np.abs(s0.entries - np.kron(np.diag(c), vac))) < 1e-12
    assert abs(s1.trace()) < 1e-15
    exact = averaged_sigma2(m, dims).entries
    residual = trace_norm(exact - (s0.entries + s1.entries / math.sqrt(n) + s2.entries / n))
    assert residual < 10 * n**-1.5
