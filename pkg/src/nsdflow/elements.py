"""Reference bases, quadrature rules and global DOF maps for the mixed spaces.

Velocities use quadratic Lagrange elements (vector valued), pressure/head and
phase/chemical-potential fields use linear elements.  DOF numbering is
entity-major: global dof = entity_id * components + component, where entities
are the domain's vertices followed (for quadratics) by its edge midpoints.
"""

import numpy as np

P1 = "P1"
P2 = "P2"


# ---------------------------------------------------------------------------
# reference bases on the triangle with vertices (0,0), (1,0), (0,1)
# ---------------------------------------------------------------------------

def reference_basis(family, point):
    """Values and reference gradients of the nodal basis at a barycentric point.

    Local node order: vertices 0,1,2; for quadratics the midpoints 3,4,5 sit
    opposite vertices 0,1,2 (node 3 on edge 1-2, node 4 on edge 2-0, node 5 on
    edge 0-1).
    """
    lam = np.asarray(point, dtype=float)
    if lam.shape != (3,):
        raise ValueError("barycentric point must have 3 coordinates")
    vals, grads = _basis_tables(family, lam.reshape(1, 3))
    return vals[0], grads[0]


def _basis_tables(family, points):
    """Vectorized basis values/gradients at an (nq, 3) array of barycentric points."""
    lam = np.asarray(points, dtype=float)
    nq = lam.shape[0]
    # gradients of the barycentric coordinates in reference (x, y)
    dlam = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    if family == P1:
        vals = lam.copy()
        grads = np.broadcast_to(dlam, (nq, 3, 2)).copy()
        return vals, grads
    if family == P2:
        vals = np.empty((nq, 6))
        grads = np.empty((nq, 6, 2))
        for i in range(3):
            vals[:, i] = lam[:, i] * (2.0 * lam[:, i] - 1.0)
            grads[:, i, :] = (4.0 * lam[:, i, None] - 1.0) * dlam[i]
        edges = ((1, 2), (2, 0), (0, 1))
        for k, (a, b) in enumerate(edges):
            vals[:, 3 + k] = 4.0 * lam[:, a] * lam[:, b]
            grads[:, 3 + k, :] = 4.0 * (lam[:, a, None] * dlam[b]
                                        + lam[:, b, None] * dlam[a])
        return vals, grads
    raise ValueError(f"unknown basis family {family!r}")


def edge_trace_basis(family, s):
    """Trace of the basis along an edge, parameterized by s in [0, 1].

    Order: endpoint a, endpoint b, then (quadratics) the edge midpoint.
    """
    s = np.asarray(s, dtype=float)
    if family == P1:
        return np.stack([1.0 - s, s], axis=-1)
    if family == P2:
        return np.stack([(1.0 - s) * (1.0 - 2.0 * s),
                         s * (2.0 * s - 1.0),
                         4.0 * s * (1.0 - s)], axis=-1)
    raise ValueError(f"unknown basis family {family!r}")


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------

class QuadratureRule:
    """Points (barycentric for triangles, s in [0,1] for edges) and weights.

    Triangle weights sum to the reference area 1/2, edge weights to 1.
    """

    def __init__(self, points, weights, exact_degree):
        self.points = np.asarray(points, dtype=float)
        self.weights = np.asarray(weights, dtype=float)
        self.exact_degree = exact_degree


def _orbit3(a):
    return [(1 - 2 * a, a, a), (a, 1 - 2 * a, a), (a, a, 1 - 2 * a)]


_S15 = np.sqrt(15.0)

_TRI_RULES = {
    1: ([(1 / 3, 1 / 3, 1 / 3)], [0.5]),
    2: (_orbit3(1 / 6), [1 / 6] * 3),
    3: ([(1 / 3, 1 / 3, 1 / 3)] + _orbit3(0.2),
        [-27 / 96] + [25 / 96] * 3),
    4: (_orbit3(0.445948490915965) + _orbit3(0.091576213509771),
        [0.111690794839005] * 3 + [0.054975871827661] * 3),
    5: ([(1 / 3, 1 / 3, 1 / 3)]
        + _orbit3((6 - _S15) / 21) + _orbit3((6 + _S15) / 21),
        [9 / 80]
        + [(155 - _S15) / 2400] * 3 + [(155 + _S15) / 2400] * 3),
}


def _duffy_rule(degree):
    # collapsed tensor Gauss rule: x = xi, y = eta (1 - xi); exact for total
    # degree `degree` because the transformed integrand has degree <= degree+1
    # in xi and <= degree in eta
    n_xi = (degree + 3) // 2
    n_eta = (degree + 2) // 2
    xg, wg = np.polynomial.legendre.leggauss(n_xi)
    yg, vg = np.polynomial.legendre.leggauss(n_eta)
    xg = 0.5 * (xg + 1.0)
    yg = 0.5 * (yg + 1.0)
    wg *= 0.5
    vg *= 0.5
    pts, wts = [], []
    for x, w in zip(xg, wg):
        for e, v in zip(yg, vg):
            y = e * (1.0 - x)
            pts.append((1.0 - x - y, x, y))
            wts.append(w * v * (1.0 - x))
    return pts, wts


def quadrature_rule(entity, exact_degree):
    """Quadrature exact for all polynomials of the requested total degree."""
    if entity == "triangle":
        if not 1 <= exact_degree <= 7:
            raise ValueError("triangle quadrature supports degrees 1..7")
        if exact_degree in _TRI_RULES:
            pts, wts = _TRI_RULES[exact_degree]
        else:
            pts, wts = _duffy_rule(exact_degree)
        return QuadratureRule(pts, wts, exact_degree)
    if entity == "edge":
        if not 1 <= exact_degree <= 9:
            raise ValueError("edge quadrature supports degrees 1..9")
        n = (exact_degree + 2) // 2
        x, w = np.polynomial.legendre.leggauss(n)
        return QuadratureRule(0.5 * (x + 1.0), 0.5 * w, exact_degree)
    raise ValueError(f"unknown entity {entity!r}")


# ---------------------------------------------------------------------------
# DOF maps
# ---------------------------------------------------------------------------

class DofMap:
    """Global numbering for a nodal space on one subdomain (or the whole mesh).

    Attributes
    ----------
    tri_ids : mesh triangle indices covered by this map
    cell_dofs : (nt, nloc * components) global dofs per triangle; local dof
        l = local_node * components + component
    entity_coords : (n_entities, 2) nodal coordinates (vertices, then midpoints)
    """

    def __init__(self, mesh, family, components, domain):
        if domain not in ("fluid", "porous", "whole"):
            raise ValueError(f"unknown domain {domain!r}")
        self.mesh = mesh
        self.family = family
        self.components = components
        self.domain = domain

        self.tri_ids = mesh.domain_triangles(domain)
        tris = mesh.triangles[self.tri_ids]

        verts = np.unique(tris)
        self.vertex_entity = np.full(mesh.n_nodes, -1, dtype=np.int64)
        self.vertex_entity[verts] = np.arange(len(verts))
        coords = [mesh.nodes[verts]]

        self.edge_entity = {}
        if family == P2:
            nxt = len(verts)
            mid = []
            for tri in tris:
                for a, b in ((tri[1], tri[2]), (tri[2], tri[0]), (tri[0], tri[1])):
                    e = (min(a, b), max(a, b))
                    if e not in self.edge_entity:
                        self.edge_entity[e] = nxt
                        mid.append(0.5 * (mesh.nodes[e[0]] + mesh.nodes[e[1]]))
                        nxt += 1
            coords.append(np.array(mid).reshape(-1, 2))

        self.entity_coords = np.vstack(coords)
        self.n_entities = len(self.entity_coords)
        self.total_dofs = self.n_entities * components

        nloc = 3 if family == P1 else 6
        self.n_local = nloc
        cell_ent = np.empty((len(tris), nloc), dtype=np.int64)
        cell_ent[:, :3] = self.vertex_entity[tris]
        if family == P2:
            for t, tri in enumerate(tris):
                for k, (a, b) in enumerate(((tri[1], tri[2]), (tri[2], tri[0]),
                                            (tri[0], tri[1]))):
                    cell_ent[t, 3 + k] = self.edge_entity[(min(a, b), max(a, b))]
        self.cell_entities = cell_ent
        self.cell_dofs = (cell_ent[:, :, None] * components
                          + np.arange(components)[None, None, :]).reshape(len(tris), -1)

        self.row_of_tri = np.full(mesh.n_triangles, -1, dtype=np.int64)
        self.row_of_tri[self.tri_ids] = np.arange(len(self.tri_ids))

        self._geom = None
        self._bnd_entities = {}

    # -- geometry caches ----------------------------------------------------

    def geometry_tables(self):
        """Per-triangle affine maps: vertex coords, Jacobian inverse, |J|."""
        if self._geom is None:
            p = self.mesh.nodes[self.mesh.triangles[self.tri_ids]]
            jac = np.empty((len(p), 2, 2))
            jac[:, :, 0] = p[:, 1] - p[:, 0]
            jac[:, :, 1] = p[:, 2] - p[:, 0]
            det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
            inv = np.empty_like(jac)
            inv[:, 0, 0] = jac[:, 1, 1]
            inv[:, 1, 1] = jac[:, 0, 0]
            inv[:, 0, 1] = -jac[:, 0, 1]
            inv[:, 1, 0] = -jac[:, 1, 0]
            inv /= det[:, None, None]
            self._geom = (p, jac, inv, det)
        return self._geom

    def dof_of(self, cell, local_node, component=0):
        return int(self.cell_dofs[cell, local_node * self.components + component])

    # -- boundary -----------------------------------------------------------

    def boundary_entities(self, tag):
        """Entity ids lying on edges with the given tag."""
        if tag not in self._bnd_entities:
            ents = set()
            for (a, b) in self.mesh.boundary[tag]["nodes"]:
                ea, eb = self.vertex_entity[a], self.vertex_entity[b]
                if ea >= 0:
                    ents.add(int(ea))
                if eb >= 0:
                    ents.add(int(eb))
                if self.family == P2:
                    e = self.edge_entity.get((min(a, b), max(a, b)))
                    if e is not None:
                        ents.add(int(e))
            self._bnd_entities[tag] = np.array(sorted(ents), dtype=np.int64)
        return self._bnd_entities[tag]

    def boundary_dofs(self, tag, component=None):
        ents = self.boundary_entities(tag)
        if component is None:
            comps = np.arange(self.components)
            return (ents[:, None] * self.components + comps[None, :]).ravel()
        return ents * self.components + component

    def boundary_mask(self, tag):
        mask = np.zeros(self.total_dofs, dtype=bool)
        mask[self.boundary_dofs(tag)] = True
        return mask

    # -- edge restriction ---------------------------------------------------

    def edge_dofs(self, tag):
        """Global dofs of the edge trace, shape (n_edges, trace_nodes * comps).

        Trace node order matches edge_trace_basis: endpoint a, endpoint b,
        then the midpoint for quadratics.
        """
        edges = self.mesh.boundary[tag]["nodes"]
        ntr = 2 if self.family == P1 else 3
        out = np.empty((len(edges), ntr * self.components), dtype=np.int64)
        for i, (a, b) in enumerate(edges):
            ents = [self.vertex_entity[a], self.vertex_entity[b]]
            if self.family == P2:
                ents.append(self.edge_entity[(min(a, b), max(a, b))])
            for k, e in enumerate(ents):
                if e < 0:
                    raise ValueError(f"edge {(a, b)} not covered by this dof map")
                for c in range(self.components):
                    out[i, k * self.components + c] = e * self.components + c
        return out


def build_dof_map(mesh, family, components, domain):
    return DofMap(mesh, family, components, domain)


# ---------------------------------------------------------------------------
# fields
# ---------------------------------------------------------------------------

class Field:
    """Coefficient vector over a DofMap (components interleaved per entity)."""

    def __init__(self, dofmap, coefficients=None):
        self.dofmap = dofmap
        if coefficients is None:
            coefficients = np.zeros(dofmap.total_dofs)
        coefficients = np.asarray(coefficients, dtype=float)
        if coefficients.shape != (dofmap.total_dofs,):
            raise ValueError("coefficient length does not match dof map")
        self.coefficients = coefficients

    def copy(self):
        return Field(self.dofmap, self.coefficients.copy())

    def component(self, c):
        return self.coefficients[c::self.dofmap.components]


def interpolate(dofmap, fn):
    """Nodal interpolation of an analytic function onto the space.

    Scalar spaces expect fn(x, y) -> array; vector spaces expect
    fn(x, y) -> (fx, fy) of arrays.
    """
    x = dofmap.entity_coords[:, 0]
    y = dofmap.entity_coords[:, 1]
    out = np.zeros(dofmap.total_dofs)
    if dofmap.components == 1:
        out[:] = np.broadcast_to(fn(x, y), x.shape)
    else:
        vals = fn(x, y)
        for c in range(dofmap.components):
            out[c::dofmap.components] = np.broadcast_to(vals[c], x.shape)
    return Field(dofmap, out)
