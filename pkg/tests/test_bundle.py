import numpy as np
import pytest

from fibrekit.bundle import (AdaptedChart, Connection10Spec, DbarSpec, HiggsSpec, MixedTensor, PrincipalConnectionSpec,
                             TransitionMap, cech_cocycle, curvature_correspondence_check, curvature_F11,
                             curvature_F11_pure, curvature_F20, dbar_decomposition_RA1, dolbeault_closedness_defect,
                             induced_connection_from_principal, ks_tensor, mixed_relative_holomorphy_defect,
                             principal_curvature, pseudo_curvature_G11, pseudo_curvature_G20,
                             relative_holomorphy_defect, tau0)
from fibrekit.errors import DimensionMismatch, NotRelativelyHolomorphic, SingularFiberJacobian
from fibrekit.families import (AbelianFamilyPoint, dbar_offset_spec, gauss_manin_connection,
                               gaussian_principal_connection, random_principal_connection)
from fibrekit.linalg import ChartFunction

C11 = AdaptedChart(1, 1)


def conn(fn, chart=C11, anti=None):
    shape = (chart.m, chart.n)
    g = ChartFunction(fn, shape)
    a = None if anti is None else ChartFunction(anti, shape)
    return Connection10Spec(chart, g, a)


def dbar(fn, chart=C11, lift=None):
    shape = (chart.m, chart.n)
    return DbarSpec(chart, None if fn is None else ChartFunction(fn, shape),
                    None if lift is None else ChartFunction(lift, shape))


P = ([0.4 - 0.3j], [1.2 + 0.5j])


# --- relative holomorphy -----------------------------------------------------

def test_holomorphic_in_fiber_has_zero_defect():
    assert relative_holomorphy_defect(conn(lambda s, z: [[s[0] * z[0]]]), P) <= 1e-8


def test_disk_example_defect_is_one():
    assert abs(relative_holomorphy_defect(conn(lambda s, z: [[-np.conj(z[0])]]), ([0.0], [1.0])) - 1.0) <= 1e-8


def test_modulus_squared_defect():
    assert abs(relative_holomorphy_defect(conn(lambda s, z: [[z[0] * np.conj(z[0])]]), ([0.0], [2 + 1j]))
               - np.sqrt(5)) <= 1e-8


def test_mixed_defect_examples():
    assert mixed_relative_holomorphy_defect(DbarSpec.canonical(C11), P) == 0.0
    assert abs(mixed_relative_holomorphy_defect(dbar(lambda s, z: [[np.conj(z[0])]]), P) - 1.0) <= 1e-8


def test_abelian_canonical_dbar_satisfies_lifting_condition():
    pt = AbelianFamilyPoint.random(np.random.default_rng(0), 2)
    from fibrekit.families import abelian_chart
    assert mixed_relative_holomorphy_defect(DbarSpec.canonical(abelian_chart(2)), pt.chart_point()) <= 1e-8


def test_abelian_offset_depends_on_pbar():
    # the offset (i/2) Π_y⁻¹ V p̄ ∂_p is antiholomorphic in p; its defect is the largest |(i/2) Π_y⁻¹ V| entry
    rng = np.random.default_rng(1)
    pt = AbelianFamilyPoint.random(rng, 2)
    from fibrekit.families import base_pairs, variation_matrix
    Yi = np.linalg.inv(pt.Pi.Pi_y)
    expected = max(np.max(np.abs(0.5 * Yi @ variation_matrix(2, i, j))) for i, j in base_pairs(2))
    got = mixed_relative_holomorphy_defect(dbar_offset_spec(2), pt.chart_point())
    assert abs(got - expected) <= 1e-8


def test_ks_tensor_matches_defect():
    c = conn(lambda s, z: [[z[0] * np.conj(z[0]) + s[0]]])
    ks = ks_tensor(c, ([0.0], [2 + 1j]))
    assert ks.signature == ("alpha", "i", "beta_bar")
    assert abs(ks.values[0, 0, 0] - (2 + 1j)) <= 1e-8
    assert abs(ks.max_abs() - relative_holomorphy_defect(c, ([0.0], [2 + 1j]))) <= 1e-12


def test_ks_and_defect_vanish_together_on_grid():
    hol = conn(lambda s, z: [[np.conj(s[0]) * z[0] ** 2]])
    anti = conn(lambda s, z: [[np.conj(s[0]) * z[0] + 0.3 * np.conj(z[0])]])
    for s in np.linspace(-1, 1, 4):
        for zr in np.linspace(-1, 1, 4):
            pt = ([s + 0.2j], [zr - 0.3j])
            assert ks_tensor(hol, pt).max_abs() <= 1e-8 and relative_holomorphy_defect(hol, pt) <= 1e-8
            assert ks_tensor(anti, pt).max_abs() > 1e-8 and relative_holomorphy_defect(anti, pt) > 1e-8


# --- curvature ---------------------------------------------------------------

def test_f11_zero_connection():
    c = conn(lambda s, z: [[0.0]])
    assert curvature_F11(c, DbarSpec.canonical(C11), P).max_abs() == 0.0


def test_f11_pure_sbar_z():
    c = conn(lambda s, z: [[np.conj(s[0]) * z[0]]])
    F = curvature_F11(c, DbarSpec.canonical(C11), ([1.0], [1.0]))
    assert F.signature == ("alpha", "i", "j_bar")
    assert abs(F.values[0, 0, 0] + 1.0) <= 1e-8
    assert abs(curvature_F11_pure(c, ([1.0], [1.0])).values[0, 0, 0] + 1.0) <= 1e-8


def test_f11_gaussian_line_bundle_at_origin():
    from fibrekit.families import chern_connection, gaussian_line_bundle
    c = chern_connection(gaussian_line_bundle())
    F = curvature_F11(c, DbarSpec.canonical(c.chart), ([0.0], [1.0]))
    assert abs(F.values[0, 0, 0] + 1.0) <= 1e-6
    # τ₀ applied to F_A = ∂_s B - ∂_s̄ A = 1 (A_s = -s̄) at z = 1
    FA = principal_curvature(gaussian_principal_connection(), [0.0])
    assert abs(F.values[0, 0, 0] - tau0(FA[0, 0], np.array([1.0]))[0]) <= 1e-6


def test_f11_gate():
    c = conn(lambda s, z: [[-np.conj(z[0])]])
    with pytest.raises(NotRelativelyHolomorphic):
        curvature_F11(c, DbarSpec.canonical(C11), P)
    with pytest.raises(NotRelativelyHolomorphic):
        curvature_F11_pure(c, P)
    # loose tolerance lets it through
    curvature_F11_pure(c, P, tol=2.0)


def test_f11_five_terms_by_hand():
    # Γ = s̄ z + z², Γ^{β̄} = s, Γ_{j̄} = s z, with the value worked out term by term:
    # ∂_s Γ_{j̄} = z;  -∂_s̄ Γ = -z;  Γ ∂_z Γ_{j̄} = (s̄z + z²) s;  -Γ_{j̄} ∂_z Γ = -s z (s̄ + 2z);
    # Γ^{β̄} ∂_z̄ Γ_{j̄} = 0
    c = conn(lambda s, z: [[np.conj(s[0]) * z[0] + z[0] ** 2]], anti=lambda s, z: [[s[0]]])
    d = dbar(lambda s, z: [[s[0] * z[0]]])
    s, z = 0.3 + 0.1j, 0.7 - 0.2j
    expected = z - z + (np.conj(s) * z + z * z) * s - s * z * (np.conj(s) + 2 * z)
    assert abs(curvature_F11(c, d, ([s], [z])).values[0, 0, 0] - expected) <= 1e-8


def test_f11_antiholomorphic_lift_term():
    # only the last term survives: Γ^{β̄} ∂_z̄ Γ_{j̄} with Γ^{β̄} = 2, Γ_{j̄} = z̄
    c = conn(lambda s, z: [[0.0]], anti=lambda s, z: [[2.0]])
    d = dbar(lambda s, z: [[np.conj(z[0])]])
    assert abs(curvature_F11(c, d, P).values[0, 0, 0] - 2.0) <= 1e-8


def test_pure_consistency_random():
    rng = np.random.default_rng(4)
    chart = AdaptedChart(2, 2)
    for _ in range(10):
        A = rng.normal(size=(2, 2, 2)) + 1j * rng.normal(size=(2, 2, 2))

        def g(s, z, A=A):
            return np.einsum("aib,b->ai", A, z) * np.conj(s)[None, :] + z[:, None] ** 2 * s[None, :]

        c = conn(g, chart)
        pt = (rng.normal(size=2) + 1j * rng.normal(size=2), rng.normal(size=2) + 1j * rng.normal(size=2))
        diff = curvature_F11(c, DbarSpec.canonical(chart), pt).values - curvature_F11_pure(c, pt).values
        assert np.max(np.abs(diff)) <= 1e-10


def test_f20_n1_is_zero():
    assert curvature_F20(conn(lambda s, z: [[np.conj(s[0]) * z[0] ** 2]]), P).max_abs() == 0.0


def test_f20_hand_example():
    chart = AdaptedChart(2, 1)
    c = conn(lambda s, z: [[z[0], s[0]]], chart)
    s = np.array([0.7 + 0.2j, -0.1j])
    R = curvature_F20(c, (s, [1.5]))
    assert abs(R.values[0, 0, 1] - (1 - s[0])) <= 1e-8
    assert abs(R.values[0, 1, 0] + (1 - s[0])) <= 1e-12
    assert R.antisymmetric == (1, 2)


def test_f20_random_antisymmetry():
    rng = np.random.default_rng(9)
    chart = AdaptedChart(3, 2)
    M = rng.normal(size=(2, 3, 2))
    c = conn(lambda s, z: np.einsum("aib,b->ai", M, z ** 2) * s[None, :], chart)
    R = curvature_F20(c, (rng.normal(size=3) + 0j, rng.normal(size=2) + 0j)).values
    assert np.max(np.abs(R + np.swapaxes(R, 1, 2))) <= 1e-12


def test_g11_examples():
    higgs = HiggsSpec(C11, ChartFunction(lambda s, z: [[s[0] * z[0] ** 2]], (1, 1)))
    assert pseudo_curvature_G11(higgs, DbarSpec.canonical(C11), P).max_abs() <= 1e-8
    higgs = HiggsSpec(C11, ChartFunction(lambda s, z: [[np.conj(s[0])]], (1, 1)))
    assert abs(pseudo_curvature_G11(higgs, DbarSpec.canonical(C11), P).values[0, 0, 0] + 1.0) <= 1e-8


def test_g11_three_terms_by_hand():
    # θ = z², Γ_{j̄} = s z: G = 0 + z²·s - s z·2z = -s z²
    higgs = HiggsSpec(C11, ChartFunction(lambda s, z: [[z[0] ** 2]], (1, 1)))
    s, z = 0.5 - 0.5j, 1 + 1j
    G = pseudo_curvature_G11(higgs, dbar(lambda s, z: [[s[0] * z[0]]]), ([s], [z]))
    assert abs(G.values[0, 0, 0] + s * z * z) <= 1e-8


def test_g11_gate():
    higgs = HiggsSpec(C11, ChartFunction(lambda s, z: [[np.conj(z[0])]], (1, 1)))
    with pytest.raises(NotRelativelyHolomorphic):
        pseudo_curvature_G11(higgs, DbarSpec.canonical(C11), P)


def test_g20_examples():
    chart = AdaptedChart(2, 1)
    assert pseudo_curvature_G20(HiggsSpec(C11, ChartFunction(lambda s, z: [[z[0] ** 2]], (1, 1))), P).max_abs() == 0
    prop = HiggsSpec(chart, ChartFunction(lambda s, z: [[z[0], 2 * z[0]]], (1, 2)))
    assert pseudo_curvature_G20(prop, ([0.1, 0.2], [0.7])).max_abs() <= 1e-10
    br = HiggsSpec(chart, ChartFunction(lambda s, z: [[1.0, z[0]]], (1, 2)))
    G = pseudo_curvature_G20(br, ([0.1, 0.2], [0.7]))
    assert abs(G.values[0, 0, 1] - 1.0) <= 1e-8 and abs(G.values[0, 1, 0] + 1.0) <= 1e-12


def test_abelian_higgs_pseudo_curvature():
    from fibrekit.families import abelian_chart, kodaira_spencer_higgs_spec
    rng = np.random.default_rng(2)
    higgs = kodaira_spencer_higgs_spec(2)
    for _ in range(5):
        pt = AbelianFamilyPoint.random(rng, 2).chart_point()
        assert pseudo_curvature_G11(higgs, DbarSpec.canonical(abelian_chart(2)), pt).max_abs() <= 1e-8
        assert pseudo_curvature_G20(higgs, pt).max_abs() <= 1e-8


# --- decomposition and closedness -------------------------------------------

def test_ra1_is_minus_f11_for_relatively_holomorphic():
    rng = np.random.default_rng(5)
    c = conn(lambda s, z: [[np.conj(s[0]) * z[0] + abs(s[0]) ** 2 * z[0] ** 2]])
    for _ in range(5):
        pt = ([complex(*rng.normal(size=2))], [complex(*rng.normal(size=2))])
        R = dbar_decomposition_RA1(c, dbar(None, lift=lambda s, z: [[s[0]]]), pt)
        assert np.max(np.abs(R.values + curvature_F11_pure(c, pt).values)) <= 1e-8


def test_ra1_examples():
    assert dbar_decomposition_RA1(conn(lambda s, z: [[0.0]]), DbarSpec.canonical(C11), P).max_abs() == 0.0
    R = dbar_decomposition_RA1(conn(lambda s, z: [[np.conj(z[0])]]), dbar(None, lift=lambda s, z: [[1.0]]), P)
    assert abs(R.values[0, 0, 0] - 1.0) <= 1e-8


def test_dolbeault_closedness():
    smooth = conn(lambda s, z: [[np.exp(np.conj(s[0])) * np.sin(z[0])]])
    assert dolbeault_closedness_defect(smooth, P) <= 1e-5
    poly = conn(lambda s, z: [[np.conj(s[0]) ** 2 * z[0] + s[0] * np.conj(s[0]) * z[0] ** 2]])
    assert dolbeault_closedness_defect(poly, P) <= 1e-8
    chart = AdaptedChart(2, 2)
    poly2 = conn(lambda s, z: np.outer(z * np.conj(z[::-1]), np.conj(s) ** 2), chart)
    assert dolbeault_closedness_defect(poly2, ([0.3, -0.2j], [0.5, 1j])) <= 1e-8


def test_dolbeault_closedness_gauss_manin():
    pt = AbelianFamilyPoint.random(np.random.default_rng(6), 1)
    assert dolbeault_closedness_defect(gauss_manin_connection(1), pt.chart_point()) <= 1e-6


# --- Čech cocycle and tensoriality ------------------------------------------

def test_cech_examples():
    t = TransitionMap(C11, ChartFunction(lambda s, z: [z[0]], (1,)))
    assert cech_cocycle(t, P).max_abs() <= 1e-12
    t = TransitionMap(C11, ChartFunction(lambda s, z: [z[0] + s[0]], (1,)))
    assert abs(cech_cocycle(t, P).values[0, 0] - 1.0) <= 1e-9
    t = TransitionMap(C11, ChartFunction(lambda s, z: [s[0] * z[0]], (1,)))
    assert abs(cech_cocycle(t, ([2.0], [3.0])).values[0, 0] - 1.5) <= 1e-9


def test_cech_singular():
    t = TransitionMap(C11, ChartFunction(lambda s, z: [s[0] * z[0]], (1,)))
    with pytest.raises(SingularFiberJacobian):
        cech_cocycle(t, ([0.0], [3.0]))


def test_f11_tensoriality_under_holomorphic_chart_change():
    # second chart z' = e^{s} z
    gamma = lambda s, z: np.conj(s[0]) * z[0] + 0.3 * z[0] ** 2 * abs(s[0]) ** 2
    tau = lambda s, z: np.exp(s[0]) * z[0]
    tau_inv = lambda s, zp: np.exp(-s[0]) * zp[0]
    c1 = conn(lambda s, z: [[gamma(s, z)]])

    # H = ∂_s + Γ ∂_z = ∂_s' + (∂z'/∂s + ∂z'/∂z Γ) ∂_z'
    def gamma2(s, zp):
        z = np.array([tau_inv(s, zp)])
        return [[np.exp(s[0]) * z[0] + np.exp(s[0]) * gamma(s, z)]]

    c2 = conn(gamma2)
    t = TransitionMap(C11, ChartFunction(lambda s, z: [tau(s, z)], (1,)))
    rng = np.random.default_rng(8)
    for _ in range(10):
        s, z = np.array([complex(*rng.uniform(-1, 1, 2))]), np.array([complex(*rng.uniform(-1, 1, 2))])
        F1 = curvature_F11(c1, DbarSpec.canonical(C11), (s, z)).values
        F2 = curvature_F11(c2, DbarSpec.canonical(C11), (s, np.array([tau(s, z)]))).values
        B, _ = t.jacobians((s, z))
        assert np.max(np.abs(np.einsum("ab,bij->aij", B, F1) - F2)) <= 1e-6


# --- principal connections ---------------------------------------------------

def test_induced_trivial():
    c, d = induced_connection_from_principal(PrincipalConnectionSpec(1, 2, lambda s: np.zeros((1, 2, 2))))
    assert np.all(c.gamma_hol(np.zeros(1), np.ones(2)) == 0)
    assert d.gamma_bar is None


def test_induced_line_bundle_is_chern():
    c, _ = induced_connection_from_principal(gaussian_principal_connection())
    s, z = 0.4 + 0.1j, 1 - 2j
    assert abs(c.gamma_hol(np.array([s]), np.array([z]))[0, 0] - np.conj(s) * z) <= 1e-14


def test_induced_rank2_diag():
    p = PrincipalConnectionSpec(1, 2, lambda s: np.array([np.diag([1.0, 2.0])]))
    c, _ = induced_connection_from_principal(p)
    np.testing.assert_allclose(c.gamma_hol(np.zeros(1), np.ones(2))[:, 0], [-1.0, -2.0])


def test_induced_is_relatively_holomorphic():
    rng = np.random.default_rng(3)
    p = random_principal_connection(rng)
    c, d = induced_connection_from_principal(p)
    for _ in range(5):
        pt = (rng.normal(size=2) + 1j * rng.normal(size=2), rng.normal(size=2) + 1j * rng.normal(size=2))
        assert relative_holomorphy_defect(c, pt) <= 1e-8
        assert mixed_relative_holomorphy_defect(d, pt) <= 1e-8


def test_induced_dimension_mismatch():
    c, _ = induced_connection_from_principal(gaussian_principal_connection())
    with pytest.raises(DimensionMismatch):
        c.gamma_hol(np.zeros(1), np.ones(2))


def test_curvature_correspondence_examples():
    flat = PrincipalConnectionSpec(1, 2, lambda s: np.array([[[1.0, 2.0], [0.5, -1.0]]]))
    assert curvature_correspondence_check(flat, ([0.3], [1.0, 1j])) <= 1e-10
    assert curvature_correspondence_check(gaussian_principal_connection(), ([0.0], [1.0])) <= 1e-6
    rng = np.random.default_rng(12)
    for _ in range(20):
        p = random_principal_connection(rng)
        pt = (rng.uniform(-1, 1, 2) + 1j * rng.uniform(-1, 1, 2), rng.normal(size=2) + 1j * rng.normal(size=2))
        assert curvature_correspondence_check(p, pt) <= 1e-6


def test_mixed_tensor_validation():
    with pytest.raises(DimensionMismatch):
        MixedTensor(np.zeros((2, 2)), ("alpha",))
    with pytest.raises(ValueError):
        MixedTensor(np.zeros(2), ("gamma",))
    with pytest.raises(ValueError):
        MixedTensor(np.ones((1, 2, 2)), ("alpha", "i", "i"), antisymmetric=(1, 2))


def test_adapted_chart_rejects_degenerate():
    with pytest.raises(DimensionMismatch):
        AdaptedChart(0, 1)
    with pytest.raises(DimensionMismatch):
        AdaptedChart(1, 0)


def test_coefficient_shape_checked():
    with pytest.raises(DimensionMismatch):
        Connection10Spec(AdaptedChart(2, 1), ChartFunction(lambda s, z: [[0.0]], (1, 1)))
