import numpy as np
import pytest

from nsdflow.mesh import (FLUID, POROUS, GAMMA_F, GAMMA_P, INTERFACE,
                          Geometry, GeometryError, build_two_domain_mesh)

UNIT_STACK = Geometry((0, 1, 0, 1), (0, 1, -1, 0))


def test_geometry_detects_horizontal_interface():
    assert UNIT_STACK.interface_axis == "y"
    assert UNIT_STACK.interface_coord == 0.0
    assert np.allclose(UNIT_STACK.normal, [0, -1])   # fluid above porous


def test_geometry_fluid_below():
    g = Geometry((0, 1, 0, 1), (0, 1, 1, 2))
    assert np.allclose(g.normal, [0, 1])


def test_geometry_vertical_interface():
    g = Geometry((1, 2, 0, 1), (0, 1, 0, 1))
    assert g.interface_axis == "x"
    assert np.allclose(g.normal, [-1, 0])


@pytest.mark.parametrize("fluid,porous", [
    ((0, 1, 0, 1), (2, 3, 0, 1)),        # not adjacent
    ((0, 1, 0, 1), (0, 0.5, -1, 0)),     # partial shared side
    ((0, 1, 0, 1), (0.2, 1.2, -1, 0)),   # offset
])
def test_geometry_rejects_bad_pairs(fluid, porous):
    with pytest.raises(GeometryError):
        Geometry(fluid, porous)


def test_geometry_rejects_empty_rectangle():
    with pytest.raises(GeometryError):
        Geometry((0, 0, 0, 1), (0, 1, -1, 0))


def test_reject_nonpositive_h():
    with pytest.raises(ValueError):
        build_two_domain_mesh(UNIT_STACK, 0.0)


def test_coarsest_mesh_counts():
    # one cell per square: 4 triangles, 6 nodes, a single interface edge
    m = build_two_domain_mesh(UNIT_STACK, 1.0)
    assert m.n_nodes == 6
    assert m.n_triangles == 4
    assert len(m.boundary[INTERFACE]["nodes"]) == 1
    assert np.all(m.triangle_areas() > 0)


def test_half_mesh_counts():
    m = build_two_domain_mesh(UNIT_STACK, 0.5)
    assert m.n_triangles == 16
    assert len(m.boundary[INTERFACE]["nodes"]) == 2


def test_filtration_interface_tiling():
    g = Geometry((0, 2, 1.5, 2), (0, 2, 0, 1.5))
    m = build_two_domain_mesh(g, 1 / 80)
    assert len(m.boundary[INTERFACE]["nodes"]) == 160


def test_domain_areas():
    m = build_two_domain_mesh(UNIT_STACK, 1 / 7)
    areas = m.triangle_areas()
    for dom, expect in ((FLUID, 1.0), (POROUS, 1.0)):
        got = areas[m.tri_domain == dom].sum()
        assert abs(got - expect) <= 1e-12 * expect


def test_interface_length_normals_tangents():
    m = build_two_domain_mesh(UNIT_STACK, 1 / 6)
    edges = m.tagged_edges(INTERFACE)
    assert abs(sum(np.linalg.norm(m.nodes[b] - m.nodes[a])
                   for (a, b), _, _ in edges) - 1.0) <= 1e-12
    for (_, _), n, tau in edges:
        assert np.allclose(n, [0, -1])
        assert np.allclose(tau, [1, 0])
    assert abs(m.boundary[INTERFACE]["length"].sum() - 1.0) <= 1e-12


def test_gamma_f_is_top_left_right():
    m = build_two_domain_mesh(UNIT_STACK, 0.5)
    for (a, b), n, tau in m.tagged_edges(GAMMA_F):
        pa, pb = m.nodes[a], m.nodes[b]
        on_top = np.isclose(pa[1], 1) and np.isclose(pb[1], 1)
        on_left = np.isclose(pa[0], 0) and np.isclose(pb[0], 0)
        on_right = np.isclose(pa[0], 1) and np.isclose(pb[0], 1)
        assert on_top or on_left or on_right
        assert abs(np.dot(n, pb - pa)) <= 1e-14     # normal orthogonal to edge
        assert np.allclose(tau, [-n[1], n[0]])      # tangent = n rotated +90


def test_boundary_edges_tagged_exactly_once():
    m = build_two_domain_mesh(UNIT_STACK, 1 / 3)
    counts = {}
    for t, tri in enumerate(m.triangles):
        for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
            e = (min(a, b), max(a, b))
            counts[e] = counts.get(e, 0) + 1
    tagged = set()
    for tag in (GAMMA_F, GAMMA_P, INTERFACE):
        for (a, b) in m.boundary[tag]["nodes"]:
            e = (min(a, b), max(a, b))
            assert e not in tagged
            tagged.add(e)
    for e, c in counts.items():
        da = {m.tri_domain[t] for t, tri in enumerate(m.triangles)
              if e[0] in tri and e[1] in tri}
        if c == 1:
            assert e in tagged              # boundary edge carries a tag
        elif len(da) == 1:
            assert e not in tagged          # interior edge carries none


def test_interface_nodes_touch_both_domains():
    m = build_two_domain_mesh(UNIT_STACK, 0.25)
    on_gamma = np.isclose(m.nodes[:, 1], 0.0)
    for v in np.nonzero(on_gamma)[0]:
        doms = {int(m.tri_domain[t]) for t, tri in enumerate(m.triangles)
                if v in tri}
        assert doms == {FLUID, POROUS}


def test_interface_adjacency():
    m = build_two_domain_mesh(UNIT_STACK, 0.5)
    b = m.boundary[INTERFACE]
    for i in range(len(b["nodes"])):
        assert m.tri_domain[b["fluid_tri"][i]] == FLUID
        assert m.tri_domain[b["porous_tri"][i]] == POROUS


def test_mesh_deterministic():
    m1 = build_two_domain_mesh(UNIT_STACK, 0.25)
    m2 = build_two_domain_mesh(UNIT_STACK, 0.25)
    assert np.array_equal(m1.nodes, m2.nodes)
    assert np.array_equal(m1.triangles, m2.triangles)
