import numpy as np
import pytest

from nsdflow import forms, oracles
from nsdflow.elements import P1, P2, Field, build_dof_map, interpolate
from nsdflow.mesh import Geometry, build_two_domain_mesh

UNIT_STACK = Geometry((0, 1, 0, 1), (0, 1, -1, 0))


@pytest.fixture(scope="module")
def mesh():
    return build_two_domain_mesh(UNIT_STACK, 0.25)


@pytest.fixture(scope="module")
def spaces(mesh):
    return {
        "vf": build_dof_map(mesh, P2, 2, "fluid"),
        "qf": build_dof_map(mesh, P1, 1, "fluid"),
        "hp": build_dof_map(mesh, P1, 1, "porous"),
        "vp": build_dof_map(mesh, P2, 2, "porous"),
        "y": build_dof_map(mesh, P1, 1, "whole"),
    }


# -- mass --------------------------------------------------------------------

def test_mass_integrates_one(spaces):
    M = forms.mass_matrix(spaces["qf"])
    one = np.ones(spaces["qf"].total_dofs)
    assert abs(one @ (M @ one) - 1.0) <= 1e-12


def test_mass_constant_energy(spaces):
    M = forms.mass_matrix(spaces["hp"], weight=2.0)
    c = 3.0 * np.ones(spaces["hp"].total_dofs)
    assert abs(c @ (M @ c) - 2.0 * 9.0 * 1.0) <= 1e-12


def test_reference_triangle_p1_mass():
    from tests.test_elements import single_triangle_mesh
    m = single_triangle_mesh()
    dm = build_dof_map(m, P1, 1, "fluid")
    M = forms.mass_matrix(dm).toarray()
    area = 0.5
    expect = area / 12.0 * np.array([[2, 1, 1], [1, 2, 1], [1, 1, 2]])
    assert np.abs(M - expect).max() <= 1e-14


# -- stiffness ---------------------------------------------------------------

def test_stiffness_kills_constants(spaces):
    A = forms.stiffness_matrix(spaces["hp"])
    c = np.ones(spaces["hp"].total_dofs)
    assert np.abs(A @ c).max() <= 1e-12


def test_anisotropic_energy(spaces):
    K = np.diag([2.0, 1.0])
    A = forms.stiffness_matrix(spaces["hp"], K)
    x = Field(spaces["hp"], spaces["hp"].entity_coords[:, 0].copy())
    # grad x = (1, 0): energy = K_xx * area = 2
    assert abs(x.coefficients @ (A @ x.coefficients) - 2.0) <= 1e-12


def test_corner_diagonal_entry():
    # single-diagonal unit square: hat at an off-diagonal corner spans one
    # triangle; |grad|^2 * area = 2 * 1/2 = 1
    m = build_two_domain_mesh(UNIT_STACK, 1.0)
    dm = build_dof_map(m, P1, 1, "fluid")
    A = forms.stiffness_matrix(dm).toarray()
    for corner in ((1.0, 0.0), (0.0, 1.0)):
        ent = np.nonzero((dm.entity_coords == corner).all(axis=1))[0][0]
        assert abs(A[ent, ent] - 1.0) <= 1e-13


def test_stiffness_rejects_indefinite(spaces):
    with pytest.raises(ValueError):
        forms.stiffness_matrix(spaces["hp"], np.array([[1.0, 2.0], [2.0, 1.0]]))


# -- divergence --------------------------------------------------------------

def test_divergence_of_translation(spaces):
    B = forms.divergence_matrix(spaces["vf"], spaces["qf"])
    u = interpolate(spaces["vf"], lambda x, y: (np.ones_like(x), 0 * x))
    assert np.abs(B @ u.coefficients).max() <= 1e-12


def test_divergence_of_linear(spaces):
    B = forms.divergence_matrix(spaces["vf"], spaces["qf"])
    u = interpolate(spaces["vf"], lambda x, y: (x, 0 * x))
    # int q div u = int q for every q
    ones = forms.load_vector(lambda x, y, t: np.ones_like(x), spaces["qf"])
    assert np.abs(B @ u.coefficients - ones).max() <= 1e-12


def test_divergence_free_quadratic(spaces):
    B = forms.divergence_matrix(spaces["vf"], spaces["qf"])
    u = interpolate(spaces["vf"], lambda x, y: (x ** 2, -2 * x * y))
    assert np.abs(B @ u.coefficients).max() <= 1e-12


def test_divergence_rejects_mismatched(spaces):
    with pytest.raises(ValueError):
        forms.divergence_matrix(spaces["vf"], spaces["hp"])


# -- interface forms ---------------------------------------------------------

def coeffs(K=2.0, alpha=1.0, nu=1.0, g=1.0):
    return forms.FormCoefficients(nu=nu, g=g, s0=1.0, K=K, alpha=alpha)


def test_bjs_tangential_energy(spaces):
    # alpha sqrt(nu g / tr K) = sqrt(1/4) = 1/2 with K = 2I
    S = forms.bjs_matrix(spaces["vf"], coeffs())
    ut = interpolate(spaces["vf"], lambda x, y: (np.ones_like(x), 0 * x))
    assert abs(ut.coefficients @ (S @ ut.coefficients) - 0.5) <= 1e-12


def test_bjs_normal_component_free(spaces):
    S = forms.bjs_matrix(spaces["vf"], coeffs())
    un = interpolate(spaces["vf"], lambda x, y: (0 * x, np.ones_like(x)))
    assert abs(un.coefficients @ (S @ un.coefficients)) <= 1e-14


def test_bjs_scales_with_alpha(spaces):
    S1 = forms.bjs_matrix(spaces["vf"], coeffs(alpha=1.0))
    S3 = forms.bjs_matrix(spaces["vf"], coeffs(alpha=3.0))
    assert np.abs(3 * S1.toarray() - S3.toarray()).max() <= 1e-14


def test_cgamma_value_and_orientation(spaces):
    Cg = forms.cgamma_matrix(spaces["vf"], spaces["hp"], g=1.0)
    phi1 = interpolate(spaces["hp"], lambda x, y: np.ones_like(x))
    vdown = interpolate(spaces["vf"], lambda x, y: (0 * x, -np.ones_like(x)))
    # n = (0,-1): v.n = 1 along the unit interface
    assert abs(vdown.coefficients @ (Cg @ phi1.coefficients) - 1.0) <= 1e-12
    vtan = interpolate(spaces["vf"], lambda x, y: (np.ones_like(x), 0 * x))
    assert abs(vtan.coefficients @ (Cg @ phi1.coefficients)) <= 1e-14


def test_cgamma_bilinear_in_g(spaces):
    C1 = forms.cgamma_matrix(spaces["vf"], spaces["hp"], g=1.0)
    C2 = forms.cgamma_matrix(spaces["vf"], spaces["hp"], g=2.5)
    assert np.abs(2.5 * C1.toarray() - C2.toarray()).max() <= 1e-14


# -- convection --------------------------------------------------------------

def test_convection_zero_field(spaces):
    z = Field(spaces["vf"])
    assert np.abs(forms.convection_vector_a(z, spaces["vf"])).max() == 0
    assert np.abs(forms.convection_vector_b(z, spaces["vf"])).max() == 0


def test_convection_constant_field(spaces):
    # constant u: volume advection vanishes, only the interface kinetic term
    # -1/2 |u|^2 int (w.n) remains
    uc = interpolate(spaces["vf"], lambda x, y: (np.ones_like(x),
                                                 2 * np.ones_like(x)))
    av = forms.convection_vector_a(uc, spaces["vf"])
    w = interpolate(spaces["vf"], lambda x, y: (0 * x, -np.ones_like(x)))
    assert abs(av @ w.coefficients - (-0.5 * 5.0 * 1.0)) <= 1e-12


def test_convection_a_skew_for_divergence_free(spaces):
    u = interpolate(spaces["vf"], lambda x, y: (x ** 2, -2 * x * y))
    av = forms.convection_vector_a(u, spaces["vf"])
    M = forms.mass_matrix(spaces["vf"])
    A = forms.stiffness_matrix(spaces["vf"])
    scale = (u.coefficients @ (M @ u.coefficients)
             + u.coefficients @ (A @ u.coefficients)) ** 1.5
    assert abs(av @ u.coefficients) <= 1e-12 * scale


def test_convection_b_skew_for_any_field(spaces):
    rng = np.random.default_rng(8)
    M = forms.mass_matrix(spaces["vf"])
    A = forms.stiffness_matrix(spaces["vf"])
    gf = spaces["vf"].boundary_dofs("gamma_f")
    for _ in range(20):
        u = Field(spaces["vf"], rng.standard_normal(spaces["vf"].total_dofs))
        u.coefficients[gf] = 0.0
        bv = forms.convection_vector_b(u, spaces["vf"])
        scale = (u.coefficients @ (M @ u.coefficients)
                 + u.coefficients @ (A @ u.coefficients)) ** 1.5
        assert abs(bv @ u.coefficients) <= 1e-12 * scale


def test_rigid_rotation_emac(spaces):
    # D(u) = 0 and div u = 0 for (-y, x): only the interface term remains
    u = interpolate(spaces["vf"], lambda x, y: (-y, x))
    bv = forms.convection_vector_b(u, spaces["vf"])
    dense = oracles.dense_interface_kinetic(spaces["vf"], u, -1.0)
    assert np.abs(bv - dense).max() <= 1e-12


# -- loads and couplings ----------------------------------------------------

def test_load_zero(spaces):
    v = forms.load_vector(lambda x, y, t: 0 * x, spaces["hp"], 0.0)
    assert np.abs(v).max() == 0


def test_load_constant_sums_to_area(spaces):
    v = forms.load_vector(lambda x, y, t: np.ones_like(x), spaces["qf"], 0.0)
    assert abs(v.sum() - 1.0) <= 1e-12


def test_load_linear(spaces):
    v = forms.load_vector(lambda x, y, t: x, spaces["qf"], 0.0)
    assert abs(v.sum() - 0.5) <= 1e-12


def test_phase_coupling_constant_mu(spaces):
    phi = interpolate(spaces["y"], lambda x, y: x + y)
    mu = interpolate(spaces["y"], lambda x, y: np.ones_like(x))
    v = forms.phase_coupling_vector(phi, mu, spaces["vf"])
    assert np.abs(v).max() <= 1e-14


def test_phase_coupling_identity(spaces):
    phi = interpolate(spaces["y"], lambda x, y: np.ones_like(x))
    mu = interpolate(spaces["y"], lambda x, y: x)
    v = forms.phase_coupling_vector(phi, mu, spaces["vf"])
    load = forms.load_vector(lambda x, y, t: (np.ones_like(x), 0 * x),
                             spaces["vf"], 0.0)
    assert np.abs(v - load).max() <= 1e-12


def test_phase_coupling_quadratic(spaces):
    phi = interpolate(spaces["y"], lambda x, y: x)
    mu = interpolate(spaces["y"], lambda x, y: x)
    v = forms.phase_coupling_vector(phi, mu, spaces["vf"])
    w = interpolate(spaces["vf"], lambda x, y: (np.ones_like(x), 0 * x))
    assert abs(v @ w.coefficients - 0.5) <= 1e-12


# -- linearity and oracle equivalence ----------------------------------------

def test_forms_linear_in_assembled_argument(spaces):
    rng = np.random.default_rng(21)
    y = spaces["y"]
    vf = spaces["vf"]
    phi1 = Field(y, rng.standard_normal(y.total_dofs))
    phi2 = Field(y, rng.standard_normal(y.total_dofs))
    mu = Field(y, rng.standard_normal(y.total_dofs))
    a, b = rng.standard_normal(2)
    combo = Field(y, a * phi1.coefficients + b * phi2.coefficients)
    lhs = forms.phase_coupling_vector(combo, mu, vf)
    rhs = a * forms.phase_coupling_vector(phi1, mu, vf) \
        + b * forms.phase_coupling_vector(phi2, mu, vf)
    assert np.abs(lhs - rhs).max() <= 1e-12 * max(1, np.abs(rhs).max())


def test_dense_oracle_equivalence():
    failures = oracles.run_assembly_checks(verbose=False)
    assert not failures, failures
