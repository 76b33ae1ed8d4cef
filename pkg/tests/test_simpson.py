import math

import numpy as np
import pytest

import fibrekit.families as fam
from fibrekit.bundle import AdaptedChart
from fibrekit.errors import DegenerateTwist, DimensionMismatch, SingularMetric
from fibrekit.linalg import ChartFunction, SiegelPoint
from fibrekit.simpson import (ComplexStructurePair, FiberMetricSpec, TwistingMap, connection_from_relative_kahler,
                              entrywise_conjugate, hypercomplex_conjugate_check, project_10, simpson_flat_to_higgs,
                              simpson_higgs_to_flat, theta_bar_J, twist_norm, twist_parametrization,
                              twisted_connection_to_higgs, twisted_higgs_to_connection)

C11 = AdaptedChart(1, 1)


def cplx(rng, *shape):
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)


def frame_at(Pi=1j):
    return fam.hyperkahler_frame(SiegelPoint(np.array([[Pi]])))


# --- relatively Kähler connection -------------------------------------------

def test_product_metric_gives_zero_connection():
    spec = FiberMetricSpec(C11, potential=ChartFunction(lambda s, z: abs(s[0]) ** 2 + abs(z[0]) ** 2, ()))
    assert np.max(np.abs(connection_from_relative_kahler(spec, ([0.3j], [1.0 - 1j])))) <= 1e-6


def test_disk_example():
    spec = FiberMetricSpec(C11, potential=fam.disk_potential())
    for z in (1.0, 0.5 - 0.25j, -1j):
        gamma = connection_from_relative_kahler(spec, ([0.2 + 0.1j], [z]))
        assert abs(gamma[0, 0] + np.conj(z)) <= 1e-6


def test_gaussian_line_bundle_potential():
    spec = FiberMetricSpec(C11, potential=fam.hermitian_potential(fam.gaussian_line_bundle()))
    assert abs(connection_from_relative_kahler(spec, ([0.0], [1.5]))[0, 0]) <= 1e-6
    s, z = 0.4 - 0.3j, 0.8 + 0.2j
    assert abs(connection_from_relative_kahler(spec, ([s], [z]))[0, 0] - np.conj(s) * z) <= 1e-5


def test_explicit_metric_and_mixed_terms():
    chart = AdaptedChart(1, 2)
    G = np.array([[2.0, 1j], [-1j, 3.0]])
    M = np.array([[1.0, 2.0 - 1j]])
    spec = FiberMetricSpec(chart, g=ChartFunction.constant(G), mixed=ChartFunction.constant(M))
    gamma = connection_from_relative_kahler(spec, ([0.0], [0.0, 0.0]))
    # Σ_α Γ^α g_{αβ̄} = -g_{β̄}: check by contracting back
    np.testing.assert_allclose(gamma[:, 0] @ G, -M[0], atol=1e-12)


def test_singular_metric():
    spec = FiberMetricSpec(C11, g=ChartFunction.constant(np.array([[-1.0]])))
    with pytest.raises(SingularMetric):
        connection_from_relative_kahler(spec, ([0.0], [0.0]))


def test_fiber_metric_spec_validation():
    with pytest.raises(ValueError):
        FiberMetricSpec(C11)
    with pytest.raises(DimensionMismatch):
        FiberMetricSpec(C11, g=ChartFunction.constant(np.eye(2)))


# --- plain mechanism ---------------------------------------------------------

def test_plain_equal_connections_give_zero_higgs():
    rng = np.random.default_rng(0)
    a, d = cplx(rng, 2, 3), cplx(rng, 2, 3)
    theta, dbar = simpson_flat_to_higgs(a, a, entrywise_conjugate, d, None)
    assert not theta.any()
    np.testing.assert_array_equal(dbar, d)


def test_plain_round_trip_many_draws():
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(1000):
        a, c, d = cplx(rng, 2, 2), cplx(rng, 2, 2), cplx(rng, 2, 2)
        theta, dbar = simpson_flat_to_higgs(a, c, entrywise_conjugate, d, None)
        d2, a2 = simpson_higgs_to_flat(dbar, theta, c, entrywise_conjugate, None)
        worst = max(worst, np.max(np.abs(d2 - d)), np.max(np.abs(a2 - a)))
        dbar3, t3 = simpson_higgs_to_flat(d, a, c, entrywise_conjugate, None)
        t4, d4 = simpson_flat_to_higgs(t3, c, entrywise_conjugate, dbar3, None)
        worst = max(worst, np.max(np.abs(t4 - a)), np.max(np.abs(d4 - d)))
    assert worst <= 1e-12


def test_plain_accepts_chart_functions():
    f = ChartFunction(lambda s, z: np.array([[s[0] * z[0]]]), (1, 1))
    zero = ChartFunction.constant(np.zeros((1, 1)))
    theta, dbar = simpson_flat_to_higgs(f, zero, entrywise_conjugate, zero, ([2.0], [1j]))
    assert theta[0, 0] == pytest.approx(1j)
    assert dbar[0, 0] == pytest.approx(1j)


def test_plain_shape_mismatch():
    with pytest.raises(DimensionMismatch):
        simpson_flat_to_higgs(np.zeros((1, 1)), np.zeros((1, 2)), entrywise_conjugate, np.zeros((1, 1)), None)
    with pytest.raises(DimensionMismatch):
        simpson_higgs_to_flat(np.zeros((1, 1)), np.zeros((2, 1)), np.zeros((1, 1)), entrywise_conjugate, None)


def test_plain_abelian_example_theta():
    # k = 1, Π = i, p = 1: GM lift minus symplectic connection, halved, is the Higgs field -i p ∂_q
    pt = fam.AbelianFamilyPoint(SiegelPoint(np.array([[1j]])), np.array([0.3 + 0.1j]), np.array([1.0 + 0j]))
    gm = fam.gauss_manin_lift(pt, 1, 1)
    sc = gm + fam.symplectic_connection_abelian(pt, 1, 1)
    theta, _ = simpson_flat_to_higgs(gm.to_real()[:, None], sc.to_real()[:, None], entrywise_conjugate,
                                     np.zeros((4, 1)), None)
    expected = fam.VerticalField.make(1, q=[-1j])
    np.testing.assert_allclose(theta[:, 0], -0.5 * fam.symplectic_connection_abelian(pt, 1, 1).to_real(), atol=1e-12)
    np.testing.assert_allclose(fam.kodaira_spencer_higgs(pt, 1, 1).to_real(), expected.to_real(), atol=1e-12)


# --- twisted mechanism -------------------------------------------------------

def test_theta_bar_J_zero():
    assert not theta_bar_J(np.zeros(4), frame_at()).any()


def test_theta_bar_J_abelian_example():
    # θ(∂_Π) = -i ∂_q at Π = i, p = 1  ↦  θ̄_J = i ∂_p
    fr = frame_at()
    theta = fam.VerticalField.make(1, q=[-1j]).to_real()
    got = fam.VerticalField.from_real(theta_bar_J(theta, fr))
    want = fam.VerticalField.make(1, p=[1j])
    assert (got - want).max_abs() <= 1e-12


def test_theta_bar_J_unit_q_direction():
    fr = frame_at(0.3 + 1.2j)
    dq = fam.VerticalField.make(1, q=[1.0]).to_real()
    direct = 1j * fr.J_A @ np.conj(dq)
    np.testing.assert_allclose(theta_bar_J(dq, fr), 0.5 * (direct - 1j * fr.J_B @ direct), atol=1e-12)


def test_theta_bar_J_conjugate_linear():
    rng = np.random.default_rng(2)
    fr = fam.hyperkahler_frame(fam.AbelianFamilyPoint.random(rng, 2).Pi)
    for _ in range(20):
        theta, lam = cplx(rng, 8), complex(*rng.normal(size=2))
        lhs = theta_bar_J(lam * theta, fr)
        assert np.max(np.abs(lhs - np.conj(lam) * theta_bar_J(theta, fr))) <= 1e-12


def test_twist_norm_hypercomplex():
    rng = np.random.default_rng(3)
    for k in (1, 2, 3):
        fr = fam.hyperkahler_frame(fam.AbelianFamilyPoint.random(rng, k).Pi)
        assert abs(twist_norm(fr) - math.sqrt(2)) <= 1e-10


def test_twisted_trivial_input():
    fr = frame_at()
    beta = twist_parametrization(fr, 0.0)
    rng = np.random.default_rng(4)
    dB0, dA0, ch = cplx(rng, 4), cplx(rng, 4), cplx(rng, 4)
    dA, pA = twisted_higgs_to_connection(dB0, dB0, dA0, np.zeros(4), fr, beta, ch)
    np.testing.assert_allclose(dA, dA0, atol=1e-15)
    np.testing.assert_allclose(pA, ch, atol=1e-15)


def test_twisted_round_trip():
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(200):
        k = int(rng.integers(1, 3))
        fr = fam.hyperkahler_frame(fam.AbelianFamilyPoint.random(rng, k).Pi)
        beta = twist_parametrization(fr, rng.uniform(0, 2 * math.pi))
        dB, dB0, dA0, ch = (cplx(rng, 4 * k) for _ in range(4))
        # θ must be a J_B-(1,0) vector
        theta = project_10(fr, cplx(rng, 4 * k))
        dA, pA = twisted_higgs_to_connection(dB, dB0, dA0, theta, fr, beta, ch)
        theta2, dB2 = twisted_connection_to_higgs(dA, dA0, dB0, pA, fr, beta, ch)
        worst = max(worst, np.max(np.abs(theta2 - theta)), np.max(np.abs(dB2 - dB)))
        dA3, pA3 = twisted_higgs_to_connection(dB2, dB0, dA0, theta2, fr, beta, ch)
        worst = max(worst, np.max(np.abs(dA3 - dA)), np.max(np.abs(pA3 - pA)))
    assert worst <= 1e-12


def test_twisted_abelian_reproduces_symplectic_connection():
    rng = np.random.default_rng(6)
    for _ in range(10):
        pt = fam.AbelianFamilyPoint.random(rng, 2)
        fr = fam.hyperkahler_frame(pt.Pi)
        beta = fam.canonical_twist(pt.Pi)
        for i, j in fam.base_pairs(2):
            gm = fam.gauss_manin_lift(pt, i, j).to_real()
            vert = fam.symplectic_connection_abelian(pt, i, j).to_real()
            theta = fam.kodaira_spencer_higgs(pt, i, j).to_real()
            # ∂_A is the flat GM lift, ∂_{ω^A} = GM + 𝒱; difference is -𝒱
            _, pA = twisted_higgs_to_connection(np.zeros(8), np.zeros(8), np.zeros(8), theta, fr, beta, gm + vert)
            assert np.max(np.abs(pA - gm)) <= 1e-12


def test_degenerate_twist():
    J = np.array([[0.0, -1.0], [1.0, 0.0]])
    fr = ComplexStructurePair(J, J, J @ J, np.eye(2), validate=False)
    beta = TwistingMap(np.eye(2))
    with pytest.raises(DegenerateTwist):
        twisted_higgs_to_connection(np.zeros(2), np.zeros(2), np.zeros(2), np.zeros(2), fr, beta, np.zeros(2))
    with pytest.raises(DegenerateTwist):
        twisted_connection_to_higgs(np.zeros(2), np.zeros(2), np.zeros(2), np.zeros(2), fr, beta, np.zeros(2))


def test_frame_validation_rejects_bad_operators():
    J = np.array([[0.0, -1.0], [1.0, 0.0]])
    with pytest.raises(ValueError):
        ComplexStructurePair(J, 2 * J, J, np.eye(2))
    with pytest.raises(DimensionMismatch):
        ComplexStructurePair(J, J, J, np.eye(3))


# --- twisting maps -----------------------------------------------------------

def test_twist_parametrization_invariants():
    rng = np.random.default_rng(7)
    for _ in range(20):
        fr = fam.hyperkahler_frame(fam.AbelianFamilyPoint.random(rng, int(rng.integers(1, 4))).Pi)
        beta = twist_parametrization(fr, rng.uniform(0, 2 * math.pi))
        assert beta.isometry_defect(fr) <= 1e-10
        assert beta.intertwining_defect(fr) <= 1e-10
        assert np.max(np.abs(beta.beta @ fr.J_A @ beta.inverse - fr.J_B)) <= 1e-10


def test_twist_angle_shift_flips_sign():
    fr = frame_at(0.2 + 0.9j)
    a = 1.234
    np.testing.assert_allclose(twist_parametrization(fr, a + math.pi).beta, -twist_parametrization(fr, a).beta,
                               atol=1e-12)


def test_twist_angle_zero_is_canonical():
    Pi = SiegelPoint(np.array([[0.4 + 1.3j]]))
    fr = fam.hyperkahler_frame(Pi)
    beta = twist_parametrization(fr, 0.0)
    np.testing.assert_allclose(beta.beta, fam.canonical_twist(Pi).beta, atol=1e-12)
    np.testing.assert_allclose(beta.inverse, math.sqrt(0.5) * (np.eye(4) - fr.J_C), atol=1e-12)


def test_twisting_map_rejects_non_intertwiner():
    fr = frame_at()
    with pytest.raises(ValueError):
        TwistingMap(np.eye(4), fr)
    with pytest.raises(ValueError):
        TwistingMap(np.zeros((4, 4)))


# --- hypercomplex conjugate --------------------------------------------------

def test_hypercomplex_zero_field():
    assert hypercomplex_conjugate_check(frame_at(), np.zeros(4), np.zeros(4)) == 0.0


def test_hypercomplex_abelian_higgs_field():
    # f_v = -i H with H = (i/4) pᵀ V p the Hamiltonian of the Higgs field
    rng = np.random.default_rng(8)
    for k in (1, 2):
        for _ in range(10):
            pt = fam.AbelianFamilyPoint.random(rng, k)
            fr = fam.hyperkahler_frame(pt.Pi)
            for i, j in fam.base_pairs(k):
                v = fam.kodaira_spencer_higgs(pt, i, j).to_real()
                df = -1j * fam.hamiltonian_differential(pt, i, j)
                assert hypercomplex_conjugate_check(fr, v, df) <= 1e-8


def test_hypercomplex_linearity():
    pt = fam.AbelianFamilyPoint.random(np.random.default_rng(9), 1)
    fr = fam.hyperkahler_frame(pt.Pi)
    v = fam.kodaira_spencer_higgs(pt, 1, 1).to_real()
    df = -1j * fam.hamiltonian_differential(pt, 1, 1)
    assert hypercomplex_conjugate_check(fr, 2 * v, 2 * df) <= 1e-10
    # the wrong normalization is detected
    assert hypercomplex_conjugate_check(fr, v, 2 * df) > 1e-3
