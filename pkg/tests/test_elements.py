import math

import numpy as np
import pytest

from nsdflow import forms
from nsdflow.elements import (P1, P2, Field, build_dof_map, interpolate,
                              quadrature_rule, reference_basis)
from nsdflow.mesh import Geometry, Mesh, build_two_domain_mesh

UNIT_STACK = Geometry((0, 1, 0, 1), (0, 1, -1, 0))


def single_triangle_mesh():
    nodes = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    tris = np.array([[0, 1, 2]])
    empty = {t: {"nodes": np.empty((0, 2), dtype=np.int64),
                 "normal": np.empty((0, 2)), "tangent": np.empty((0, 2)),
                 "length": np.empty(0)}
             for t in ("gamma_f", "gamma_p", "interface")}
    empty["interface"]["fluid_tri"] = np.empty(0, dtype=np.int64)
    empty["interface"]["porous_tri"] = np.empty(0, dtype=np.int64)
    return Mesh(nodes, tris, np.array([0], dtype=np.int8), empty,
                UNIT_STACK, 1.0)


# -- reference bases ---------------------------------------------------------

def test_p1_nodal_property():
    vals, _ = reference_basis(P1, (1, 0, 0))
    assert np.allclose(vals, [1, 0, 0])
    vals, _ = reference_basis(P1, (0, 0, 1))
    assert np.allclose(vals, [0, 0, 1])


def test_p2_nodal_property():
    # vertices
    for i, lam in enumerate(((1, 0, 0), (0, 1, 0), (0, 0, 1))):
        vals, _ = reference_basis(P2, lam)
        expect = np.zeros(6)
        expect[i] = 1
        assert np.allclose(vals, expect, atol=1e-14)
    # midpoints: node 3+k opposite vertex k
    mids = (((0, .5, .5), 3), ((.5, 0, .5), 4), ((.5, .5, 0), 5))
    for lam, node in mids:
        vals, _ = reference_basis(P2, lam)
        expect = np.zeros(6)
        expect[node] = 1
        assert np.allclose(vals, expect, atol=1e-14)


def test_partition_of_unity():
    rng = np.random.default_rng(0)
    for _ in range(10):
        a, b = rng.random(2)
        if a + b > 1:
            a, b = 1 - a, 1 - b
        lam = (1 - a - b, a, b)
        for fam in (P1, P2):
            vals, grads = reference_basis(fam, lam)
            assert abs(vals.sum() - 1) <= 1e-13
            assert np.abs(grads.sum(axis=0)).max() <= 1e-13


# -- quadrature --------------------------------------------------------------

def exact_tri_monomial(a, b):
    return math.factorial(a) * math.factorial(b) / math.factorial(a + b + 2)


def test_centroid_rule():
    qr = quadrature_rule("triangle", 1)
    assert len(qr.weights) == 1
    assert np.allclose(qr.points[0], [1 / 3] * 3)
    assert np.isclose(qr.weights[0], 0.5)


def test_edge_degree3_is_two_point_gauss():
    qr = quadrature_rule("edge", 3)
    assert len(qr.weights) == 2
    assert np.allclose(qr.weights, [0.5, 0.5])
    assert np.allclose(sorted(qr.points),
                       [0.5 - 0.5 / np.sqrt(3), 0.5 + 0.5 / np.sqrt(3)])


def test_degree5_integrates_x2y3():
    # analytic value of the monomial integral over the reference triangle
    qr = quadrature_rule("triangle", 5)
    x = qr.points[:, 1]
    y = qr.points[:, 2]
    got = (qr.weights * x ** 2 * y ** 3).sum()
    assert abs(got - exact_tri_monomial(2, 3)) <= 1e-14


@pytest.mark.parametrize("degree", range(1, 8))
def test_triangle_rules_exact(degree):
    qr = quadrature_rule("triangle", degree)
    assert abs(qr.weights.sum() - 0.5) <= 1e-14
    x = qr.points[:, 1]
    y = qr.points[:, 2]
    for a in range(degree + 1):
        for b in range(degree + 1 - a):
            got = (qr.weights * x ** a * y ** b).sum()
            assert abs(got - exact_tri_monomial(a, b)) <= 1e-14, (a, b)


@pytest.mark.parametrize("degree", range(1, 10))
def test_edge_rules_exact(degree):
    qr = quadrature_rule("edge", degree)
    assert abs(qr.weights.sum() - 1.0) <= 1e-14
    for a in range(degree + 1):
        got = (qr.weights * qr.points ** a).sum()
        assert abs(got - 1.0 / (a + 1)) <= 1e-14


@pytest.mark.parametrize("entity,degree", [("triangle", 0), ("triangle", 8),
                                           ("edge", 0), ("edge", 10)])
def test_unsupported_degrees(entity, degree):
    with pytest.raises(ValueError):
        quadrature_rule(entity, degree)


# -- dof maps ----------------------------------------------------------------

def test_single_triangle_dof_counts():
    m = single_triangle_mesh()
    assert build_dof_map(m, P1, 1, "fluid").total_dofs == 3
    assert build_dof_map(m, P2, 2, "fluid").total_dofs == 12


def test_unit_square_p2_scalar_dofs():
    m = build_two_domain_mesh(UNIT_STACK, 1.0)
    dm = build_dof_map(m, P2, 1, "fluid")
    assert dm.total_dofs == 9      # 4 vertices + 5 edges


def test_whole_domain_shares_interface_dofs():
    m = build_two_domain_mesh(UNIT_STACK, 0.5)
    whole = build_dof_map(m, P2, 1, "whole")
    fluid = build_dof_map(m, P2, 1, "fluid")
    porous = build_dof_map(m, P2, 1, "porous")
    # interface entities are counted once in the whole-domain map
    assert whole.n_entities == fluid.n_entities + porous.n_entities \
        - (2 + 1) * 2 + 1   # 3 shared vertices + 2 shared edge midpoints
    assert whole.total_dofs == whole.n_entities


def test_dof_of_bijection():
    m = build_two_domain_mesh(UNIT_STACK, 0.5)
    dm = build_dof_map(m, P2, 2, "fluid")
    seen = set(dm.cell_dofs.ravel().tolist())
    assert seen == set(range(dm.total_dofs))


def test_boundary_masks():
    m = build_two_domain_mesh(UNIT_STACK, 0.5)
    dm = build_dof_map(m, P1, 1, "porous")
    gp = dm.boundary_dofs("gamma_p")
    coords = dm.entity_coords[gp]
    for x, y in coords:
        assert np.isclose(y, -1) or np.isclose(x, 0) or np.isclose(x, 1)
    iface = dm.boundary_dofs("interface")
    assert np.allclose(dm.entity_coords[iface][:, 1], 0.0)


@pytest.mark.parametrize("fam,comps,poly", [
    (P1, 1, lambda x, y: 2 * x - 3 * y + 1),
    (P2, 1, lambda x, y: x ** 2 - x * y + 2 * y ** 2 + x - 1),
])
def test_interpolation_reproduces_polynomials(fam, comps, poly):
    m = build_two_domain_mesh(UNIT_STACK, 0.5)
    dm = build_dof_map(m, fam, comps, "whole")
    f = interpolate(dm, poly)
    rng = np.random.default_rng(3)
    lam = rng.dirichlet(np.ones(3), size=6)
    tri_ids = dm.tri_ids[rng.integers(0, len(dm.tri_ids), size=6)]
    vals = forms.eval_field(f, tri_ids, lam)
    verts = m.nodes[m.triangles[tri_ids]]
    # evaluate at the matching physical points
    for k in range(6):
        x, y = lam[k] @ verts[k]
        assert abs(vals[k, k] - poly(x, y)) <= 1e-12


def test_p2_mass_matches_analytic_reference():
    # exact reference-triangle P2 mass entries via the monomial formula
    import sympy as sp
    xs, ys = sp.symbols("x y")
    lam = [1 - xs - ys, xs, ys]
    basis = [l * (2 * l - 1) for l in lam] + \
        [4 * lam[1] * lam[2], 4 * lam[2] * lam[0], 4 * lam[0] * lam[1]]
    exact = np.array([[float(sp.integrate(bi * bj, (ys, 0, 1 - xs), (xs, 0, 1)))
                       for bj in basis] for bi in basis])
    qr = quadrature_rule("triangle", 4)
    from nsdflow.elements import _basis_tables
    vals, _ = _basis_tables(P2, qr.points)
    got = np.einsum("q,qi,qj->ij", qr.weights, vals, vals)
    assert np.abs(got - exact).max() <= 1e-14


def test_field_length_validation():
    m = build_two_domain_mesh(UNIT_STACK, 1.0)
    dm = build_dof_map(m, P1, 1, "fluid")
    with pytest.raises(ValueError):
        Field(dm, np.zeros(dm.total_dofs + 1))
