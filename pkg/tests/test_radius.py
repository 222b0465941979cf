"""Tests for the bisection radius, attainment, and classification."""

import numpy as np
import pytest

from iqcradius.model import IqcSet, SystemData
from iqcradius.radius import (
    attainment_check,
    classify,
    exponential_rate_certificate,
    margin_matrix,
    spectral_radius,
)
from iqcradius.sdp_engine import SolverConfig, solve_margin_primal

PROBE = SolverConfig(feas_tol=1e-10, gap_tol=1e-10, max_iter=300)


def sector_constraint(m_f: float, L: float) -> list:
    """Quadratic form that is nonnegative when u lies in the sector
    between the lines u = m_f*x and u = L*x."""
    return [[-m_f * L, (m_f + L) / 2.0], [(m_f + L) / 2.0, -1.0]]


def gradient_instance(alpha: float):
    sys = SystemData(A=[[1.0]], B=[[-alpha]])
    iqcs = IqcSet.from_matrices([sector_constraint(1.0, 10.0)])
    return sys, iqcs


def test_radius_scalar_matches_eigenvalue():
    cert = spectral_radius(SystemData(A=[[0.5]]), IqcSet.empty(1))
    assert cert.ok
    assert cert.rho == pytest.approx(0.5, abs=1e-6)
    assert cert.attained


def test_radius_defective_boundary_not_attained():
    sys = SystemData(A=[[1.0, 1.0], [0.0, 1.0]])
    cert = spectral_radius(sys, IqcSet.empty(2))
    assert cert.rho == pytest.approx(1.0, abs=1e-6)
    assert not cert.attained


def test_radius_gradient_descent_instance():
    sys, iqcs = gradient_instance(2.0 / 11.0)
    cert = spectral_radius(sys, iqcs)
    assert cert.rho == pytest.approx(9.0 / 11.0, abs=1e-4)
    assert cert.attained


def test_radius_matches_eigenvalues_on_random_matrices():
    rng = np.random.default_rng(17)
    for _ in range(10):
        n = int(rng.integers(1, 6))
        A = rng.normal(size=(n, n))
        cert = spectral_radius(SystemData(A=A), IqcSet.empty(n))
        oracle = float(np.max(np.abs(np.linalg.eigvals(A))))
        assert abs(cert.rho - oracle) <= 1e-5


def test_monotone_feasibility_above_the_radius():
    sys, iqcs = gradient_instance(2.0 / 11.0)
    cert = spectral_radius(sys, iqcs)
    for off in (0.01, 0.05, 0.1, 0.5, 1.0):
        res = solve_margin_primal(sys, iqcs, cert.rho + off, PROBE)
        assert res.margin_check < 0


def test_certificate_revalidates_by_eigenvalues():
    cases = [
        gradient_instance(2.0 / 11.0),
        (SystemData(A=[[0.5]]), IqcSet.empty(1)),
        (SystemData(A=[[0.0, 1.0], [-1.0, 0.0]]), IqcSet.empty(2)),
    ]
    for sys, iqcs in cases:
        cert = spectral_radius(sys, iqcs)
        assert cert.P is not None
        scale = sys.scale() + iqcs.scale()
        H = margin_matrix(sys, iqcs, cert.rho_cert, cert.P, cert.lambdas)
        assert float(np.linalg.eigvalsh(H)[-1]) <= 1e-6 * scale
        assert float(np.linalg.eigvalsh(cert.P)[0]) >= 1.0 - 1e-6
        assert np.all(cert.lambdas >= 0)
        assert cert.bracket[0] <= cert.rho <= cert.bracket[1]


def test_attainment_boundary_cases():
    pm = IqcSet.from_matrices([[[1.0]], [[-1.0]]])
    attained, _ = attainment_check(SystemData(A=[[1.0]]), pm, 1.0)
    assert attained
    attained, _ = attainment_check(
        SystemData(A=[[1.0, 1.0], [0.0, 1.0]]), IqcSet.empty(2), 1.0)
    assert not attained
    attained, _ = attainment_check(SystemData(A=[[0.0]]), IqcSet.empty(1), 1.0)
    assert attained


def test_no_certificate_sentinel_for_unweighted_input():
    # With an input but no constraint weighting it, the (2,2) block of
    # the inequality is B'PB > 0, so no rate admits a certificate.
    sys = SystemData(A=[[0.5]], B=[[1.0]])
    cert = spectral_radius(sys, IqcSet.empty(2), rho_max=50.0)
    assert cert.status == "no-certificate"
    assert np.isinf(cert.rho)
    assert not cert.attained


def test_rho_max_ceiling_applies_to_eigenvalue_shortcut():
    sys = SystemData(A=[[0.0, 1.0], [-1.0, 0.0]])
    cert = spectral_radius(sys, IqcSet.empty(2), rho_max=0.5)
    assert cert.status == "no-certificate"
    assert np.isinf(cert.rho)


def test_classify_stable_scalar():
    verdict = classify(SystemData(A=[[0.5]]), IqcSet.empty(1))
    assert verdict.classification == "asymptotically-stable"


def test_classify_defective_boundary_inconclusive_with_diagnostic():
    sys = SystemData(A=[[1.0, 1.0], [0.0, 1.0]])
    verdict = classify(sys, IqcSet.empty(2))
    assert verdict.classification == "inconclusive"
    assert verdict.trajectory is not None
    norms = np.linalg.norm(verdict.trajectory.states, axis=1)
    assert norms[-1] > 10.0 * norms[0]
    assert any("not attained" in r for r in verdict.reasons)
    assert any("grow" in r for r in verdict.reasons)


def test_classify_plane_rotation_bounded_with_witness():
    sys = SystemData(A=[[0.0, 1.0], [-1.0, 0.0]])
    verdict = classify(sys, IqcSet.empty(2))
    assert verdict.classification == "bounded"
    assert verdict.trajectory is not None
    norms = np.linalg.norm(verdict.trajectory.states, axis=1)
    assert norms.max() - norms.min() <= 1e-9
    assert norms.min() > 0


def test_classify_opposite_sign_pair_certifies_any_rate():
    # Weighting -M makes the rate inequality feasible at every rate, so
    # the computed radius is zero and the verdict is stability; the
    # constraints admit only the zero trajectory, so the verdict is
    # true for every admissible trajectory.
    pm = IqcSet.from_matrices([[[1.0]], [[-1.0]]])
    verdict = classify(SystemData(A=[[1.0]]), pm)
    assert verdict.classification == "asymptotically-stable"
    assert verdict.certificate.rho == pytest.approx(0.0, abs=1e-6)


def test_exponential_rate_scalar():
    res = exponential_rate_certificate(SystemData(A=[[0.5]]), IqcSet.empty(1))
    assert res.ok
    assert res.rho == pytest.approx(0.5, abs=1e-6)
    cert = res.certificate
    sys = SystemData(A=[[0.5 / res.rho]])
    H = margin_matrix(sys, IqcSet.empty(1), 1.0, cert.P, cert.lambdas)
    assert float(np.linalg.eigvalsh(H)[-1]) <= 1e-6


def test_exponential_rate_gradient_descent():
    sys, iqcs = gradient_instance(2.0 / 11.0)
    res = exponential_rate_certificate(sys, iqcs)
    assert res.ok
    assert res.rho == pytest.approx(9.0 / 11.0, abs=1e-4)


def test_exponential_rate_declined_without_attainment():
    sys = SystemData(A=[[1.0, 1.0], [0.0, 1.0]])
    res = exponential_rate_certificate(sys, IqcSet.empty(2))
    assert not res.ok
    assert "not attained" in res.reason


def test_spectral_radius_rejects_bad_options():
    sys = SystemData(A=[[0.5]])
    with pytest.raises(ValueError):
        spectral_radius(sys, IqcSet.empty(1), bisect_tol=0.0)
    with pytest.raises(ValueError):
        spectral_radius(sys, IqcSet.empty(1), rho_max=-1.0)
