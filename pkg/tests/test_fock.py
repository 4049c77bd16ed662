import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coherent_learning.errors import InvalidInputError
from coherent_learning.fock import (
    FockMatrix,
    beam_splitter_pair,
    coherent_ket,
    concentrate,
    displacement_matrix,
    helstrom_error,
    helstrom_projector,
    partial_trace,
    poisson_tail,
    tensor,
    trace_norm,
)

amp = st.complex_numbers(max_magnitude=2.0, allow_nan=False, allow_infinity=False)


def random_density(dim, rng):
    x = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = x @ x.conj().T
    return FockMatrix(rho / np.trace(rho).real)


def random_hermitian(dim, rng):
    x = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return FockMatrix(x + x.conj().T)


def test_vacuum_ket():
    e = coherent_ket(0.0, 8).entries
    assert np.array_equal(e, np.eye(8)[0])


def test_coherent_norm_deficit_matches_poisson_tail():
    k = coherent_ket(1.0, 30)
    # independent tail: 1 - sum_{j<30} e^-1 / j!
    tail = 1.0 - sum(math.exp(-1.0) / math.factorial(j) for j in range(30))
    assert k.norm_deficit < 1e-10
    assert abs(k.norm_deficit - max(tail, 0.0)) < 1e-12
    assert abs(1.0 - np.vdot(k.entries, k.entries).real - k.norm_deficit) < 1e-12


def test_coherent_overlap_chi():
    a, b = coherent_ket(1.0, 40).entries, coherent_ket(-1.0, 40).entries
    assert abs(np.vdot(a, b) - math.exp(-2.0)) < 1e-12


def test_coherent_rejects_nonfinite():
    with pytest.raises(InvalidInputError):
        coherent_ket(float("nan"), 5)
    with pytest.raises(InvalidInputError):
        coherent_ket(1.0, 0)


def test_displacement_identity_and_vacuum_column():
    assert np.allclose(displacement_matrix(0.0, 10).entries, np.eye(10), atol=1e-15)
    d = displacement_matrix(0.5, 40)
    assert not d.hermitian
    assert np.max(np.abs(d.entries[:, 0] - coherent_ket(0.5, 40).entries)) < 1e-10


def test_displacement_inverse():
    a = 1 + 0.5j
    prod = displacement_matrix(a, 60).entries @ displacement_matrix(-a, 60).entries
    # the truncated generator is anti-Hermitian, so the product is exact
    assert np.max(np.abs(prod - np.eye(60))) < 1e-8


def test_beam_splitter_cases():
    a, b = 0.3 + 0.2j, -0.1j
    assert beam_splitter_pair(a, b, 1.0) == (a, b)
    out = beam_splitter_pair(0.7, 0.7, 0.5)
    assert abs(out[0] - 0.7 * math.sqrt(2)) < 1e-15 and abs(out[1]) < 1e-15
    with pytest.raises(InvalidInputError):
        beam_splitter_pair(a, b, 1.5)


@given(amp, amp, st.floats(0.0, 1.0))
def test_beam_splitter_conserves_energy(a, b, t):
    o1, o2 = beam_splitter_pair(a, b, t)
    assert abs(abs(o1) ** 2 + abs(o2) ** 2 - abs(a) ** 2 - abs(b) ** 2) < 1e-12


def test_concentrate():
    assert concentrate(1, 0.4 + 0.1j) == 0.4 + 0.1j
    assert abs(concentrate(2, 0.7) - 0.7 * math.sqrt(2)) < 1e-15
    assert abs(concentrate(9, 0.3) - 0.9) < 1e-12
    with pytest.raises(InvalidInputError):
        concentrate(0, 1.0)


def test_tensor_and_partial_trace():
    rng = np.random.default_rng(1)
    eye = FockMatrix(np.eye(3)), FockMatrix(np.eye(4))
    assert np.array_equal(tensor(*eye).entries, np.eye(12))
    a, b = random_density(3, rng), random_density(4, rng)
    ab = tensor(a, b)
    assert ab.dims == (3, 4)
    assert abs(ab.trace() - a.trace() * b.trace()) < 1e-12
    assert np.allclose(partial_trace(ab, 1).entries, b.entries, atol=1e-12)
    vac = coherent_ket(0.0, 5).projector()
    coh = coherent_ket(0.8, 30).projector()
    assert np.max(np.abs(partial_trace(tensor(vac, coh), 1).entries - coh.entries)) < 1e-12


def test_hermiticity_enforced():
    with pytest.raises(InvalidInputError):
        FockMatrix(np.array([[0, 1], [0, 0]]))


def test_trace_norm_cases():
    rng = np.random.default_rng(2)
    rho = random_density(6, rng)
    assert abs(trace_norm(rho) - 1.0) < 1e-12
    d = coherent_ket(0.0, 40).projector() - coherent_ket(1.0, 40).projector()
    assert abs(trace_norm(d) - 1.590120) < 1e-6
    m = random_hermitian(5, rng)
    assert abs(trace_norm(m.scaled(-3.0)) - 3.0 * trace_norm(m)) < 1e-10


def test_trace_norm_unitary_invariance():
    rng = np.random.default_rng(3)
    m = random_hermitian(8, rng).entries
    m = np.pad(m, ((0, 52), (0, 52)))  # keep support well below the cutoff
    u = displacement_matrix(0.4 - 0.3j, 60).entries
    assert abs(trace_norm(u @ m @ u.conj().T) - trace_norm(m)) < 1e-10


def test_helstrom_error_cases():
    rng = np.random.default_rng(4)
    rho = random_density(4, rng)
    assert abs(helstrom_error(rho, rho) - 0.5) < 1e-15
    e0, e1 = (FockMatrix(np.diag(v)) for v in ([1.0, 0.0], [0.0, 1.0]))
    assert abs(helstrom_error(e0, e1)) < 1e-15
    vac, coh = coherent_ket(0.0, 40).projector(), coherent_ket(1.0, 40).projector()
    assert abs(helstrom_error(vac, coh) - 0.5 * (1 - math.sqrt(1 - math.exp(-1)))) < 1e-6
    with pytest.raises(InvalidInputError):
        helstrom_error(vac, FockMatrix(np.eye(3) / 3))


@settings(max_examples=25)
@given(st.floats(0.0, 1.0), st.integers(0, 10_000))
def test_helstrom_symmetric_under_swap(p, seed):
    rng = np.random.default_rng(seed)
    a, b = random_density(3, rng), random_density(3, rng)
    assert abs(helstrom_error(a, b, p) - helstrom_error(b, a, 1 - p)) < 1e-12


def test_helstrom_monotone_in_amplitude():
    vac = coherent_ket(0.0, 50).projector()
    errs = [helstrom_error(vac, coherent_ket(a, 50).projector()) for a in np.linspace(0.1, 3, 30)]
    assert all(x > y for x, y in zip(errs, errs[1:]))


def test_helstrom_projector_contract():
    rng = np.random.default_rng(5)
    a, b = random_density(5, rng), random_density(5, rng)
    pi = helstrom_projector(a, b)
    diff = a.entries - b.entries
    lhs = np.trace(pi.entries @ diff).real
    assert abs(lhs - (trace_norm(diff) + np.trace(diff).real) / 2) < 1e-10
    assert np.allclose(pi.entries @ pi.entries, pi.entries, atol=1e-12)
    same = helstrom_projector(a, a)
    assert abs(np.trace(same.entries @ (a.entries - a.entries))) < 1e-15
    psi = FockMatrix(np.diag([1.0, 0, 0]))
    chi = FockMatrix(np.diag([0, 1.0, 0]))
    assert np.allclose(helstrom_projector(psi, chi).entries, psi.entries)


def test_projector_error_matches_helstrom():
    vac, one = FockMatrix(np.diag([1.0, 0, 0])), FockMatrix(np.diag([0, 1.0, 0]))
    c0, c1 = coherent_ket(0.0, 30).projector(), coherent_ket(1.0, 30).projector()
    for r1, r2 in ((vac, one), (c0, c1)):
        pi = helstrom_projector(r1, r2).entries
        err = 0.5 * (np.trace((np.eye(len(pi)) - pi) @ r1.entries) + np.trace(pi @ r2.entries)).real
        assert abs(err - helstrom_error(r1, r2)) < 1e-10


def test_poisson_tail_zero_mean():
    assert poisson_tail(0.0, 3) == 0.0


def test_operations_are_deterministic():
    rng = np.random.default_rng(6)
    m = random_hermitian(20, rng)
    assert trace_norm(m) == trace_norm(m)
