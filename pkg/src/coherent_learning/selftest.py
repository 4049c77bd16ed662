"""Fast invariant checks across all modules, used by ``cli selftest``."""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from . import collective as col
from . import eand
from . import fock
from . import localmodel as lm
from . import twopoint as tp


def _close(a, b, tol):
    return abs(a - b) <= tol, f"{a!r} vs {b!r} (tol {tol:g})"


def check_coherent_overlap():
    a = fock.coherent_ket(1.0, 40).entries
    b = fock.coherent_ket(-1.0, 40).entries
    return _close(float(np.vdot(a, b).real), math.exp(-2.0), 1e-12)


def check_trace_norm_pure():
    a = fock.coherent_ket(0.0, 40).projector()
    b = fock.coherent_ket(1.0, 40).projector()
    return _close(fock.trace_norm(a - b), 2 * math.sqrt(1 - math.exp(-1)), 1e-9)


def check_concentrate():
    return _close(abs(fock.concentrate(9, 0.3)), 0.9, 1e-12)


def check_prior_moments():
    g = lm.build_quadrature(1.5, 40)
    return _close(float(np.dot(g.weights, np.abs(g.nodes) ** 2)), 2.25, 1e-10)


def check_sigma_marginals():
    m = lm.LocalModel(1.0, 1.0, 100)
    s1 = lm.averaged_sigma1(m, (30, 20))
    s2 = lm.averaged_sigma2(m, (30, 20))
    a = fock.partial_trace(s1, 0).entries
    b = fock.partial_trace(s2, 0).entries
    return _close(float(np.max(np.abs(a - b))), 0.0, 1e-10)


def check_lambda_series():
    lp, _ = col.lambda2_pm(1.0, 1.0)
    sp_, _ = col.lambda2_series(1.0, 1.0)
    return _close(lp / sp_, 1.0, 1e-8)


def check_collective_finite():
    m = lm.LocalModel(1.0, 1.0, 10**5)
    return _close(col.pe_opt_finite(m), col.pe_opt_asymptotic(1.0, 1.0, 10**5), 5e-9)


def check_backends_agree():
    m = lm.LocalModel(1.0, 1.0, 50)
    return _close(col.pe_opt_finite(m), col.pe_opt_finite(m, (40, 20), method="fock"), 1e-9)


def check_delta_routes():
    s = eand.HeterodyneSettings(-0.2)
    return _close(eand.delta_eand(1.0, 2.0, s), eand.delta_eand_numeric(1.0, 2.0, s), 1e-12)


def check_squeezing():
    return _close(eand.optimal_squeezing(1.0), -0.0966638, 1e-6)


def check_risk_ordering():
    ok = all(eand.excess_risk_eand_min(a) >= col.excess_risk_opt(a)
             for a in np.linspace(0.3, 3.0, 28))
    return ok, "E&D risk dominates collective risk on [0.3, 3]"


def check_twopoint_symmetry():
    p, q = tp.p_plus_minus(tp.optimal_c())
    return _close(p, q, 1e-10)


CHECKS: list[tuple[str, Callable]] = [
    ("fock.coherent_overlap", check_coherent_overlap),
    ("fock.trace_norm_pure_states", check_trace_norm_pure),
    ("fock.concentrate", check_concentrate),
    ("localmodel.prior_second_moment", check_prior_moments),
    ("localmodel.first_mode_marginals", check_sigma_marginals),
    ("collective.lambda_series_oracle", check_lambda_series),
    ("collective.finite_vs_asymptotic", check_collective_finite),
    ("collective.backends_agree", check_backends_agree),
    ("eand.delta_two_routes", check_delta_routes),
    ("eand.optimal_squeezing", check_squeezing),
    ("eand.risk_ordering", check_risk_ordering),
    ("twopoint.symmetric_optimum", check_twopoint_symmetry),
]


def run(report=print) -> bool:
    """Run every check; report one line each and return overall success."""
    all_ok = True
    for name, fn in CHECKS:
        try:
            ok, detail = fn()
        except Exception as exc:  # a crash is a failure, not an abort
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        all_ok &= bool(ok)
        report(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    return all_ok
