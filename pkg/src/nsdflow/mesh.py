"""Structured triangulations of a two-rectangle free-flow / porous-media geometry.

The computational domain is the union of a fluid rectangle and a porous
rectangle that share exactly one full edge (the interface).  The mesh is a
conforming criss-cross-free triangulation: every grid cell is split by the
diagonal from its lower-left to its upper-right corner.  Nodes on the
interface are shared between the two subdomains so that interface integrals
can be evaluated on a common trace.
"""

import numpy as np

FLUID = 0
POROUS = 1

GAMMA_F = "gamma_f"        # outer boundary of the fluid rectangle
GAMMA_P = "gamma_p"        # outer boundary of the porous rectangle
INTERFACE = "interface"    # shared edge, normal oriented fluid -> porous

_TAGS = (GAMMA_F, GAMMA_P, INTERFACE)


class GeometryError(ValueError):
    pass


class Geometry:
    """Two axis-aligned rectangles sharing exactly one full edge.

    Each rectangle is given as (x_min, x_max, y_min, y_max).  The shared edge
    is detected automatically; its orientation fixes the interface normal
    n = n_f pointing from the fluid into the porous domain.
    """

    def __init__(self, fluid_rect, porous_rect):
        self.fluid_rect = tuple(float(v) for v in fluid_rect)
        self.porous_rect = tuple(float(v) for v in porous_rect)
        for name, (x0, x1, y0, y1) in (("fluid", self.fluid_rect),
                                       ("porous", self.porous_rect)):
            if not (x1 > x0 and y1 > y0):
                raise GeometryError(f"{name} rectangle has non-positive area")
        self.interface_axis, self.interface_coord, self.normal = self._find_interface()

    def _find_interface(self):
        fx0, fx1, fy0, fy1 = self.fluid_rect
        px0, px1, py0, py1 = self.porous_rect
        tol = 1e-12 * max(abs(v) for v in self.fluid_rect + self.porous_rect + (1.0,))

        def close(a, b):
            return abs(a - b) <= tol

        # horizontal interface: rectangles stacked in y with equal x-extent
        if close(fx0, px0) and close(fx1, px1):
            if close(fy0, py1):   # fluid above porous
                return "y", fy0, np.array([0.0, -1.0])
            if close(fy1, py0):   # fluid below porous
                return "y", fy1, np.array([0.0, 1.0])
        # vertical interface: side by side with equal y-extent
        if close(fy0, py0) and close(fy1, py1):
            if close(fx0, px1):   # fluid right of porous
                return "x", fx0, np.array([-1.0, 0.0])
            if close(fx1, px0):   # fluid left of porous
                return "x", fx1, np.array([1.0, 0.0])
        raise GeometryError("rectangles must share exactly one full edge")


class Mesh:
    """Conforming triangulation of the two-domain geometry.

    Attributes
    ----------
    nodes : (N, 2) float array
    triangles : (T, 3) int array, counterclockwise
    tri_domain : (T,) int array of FLUID / POROUS
    boundary : dict tag -> dict with keys
        'nodes'   (E, 2) int array, edge endpoints ordered along the tangent
        'normal'  (E, 2) outward unit normal (fluid->porous on the interface)
        'tangent' (E, 2) unit tangent, normal rotated by +90 degrees
        'length'  (E,) edge lengths
        and, for the interface only, 'fluid_tri' / 'porous_tri' adjacency.
    """

    def __init__(self, nodes, triangles, tri_domain, boundary, geometry, h):
        self.nodes = nodes
        self.triangles = triangles
        self.tri_domain = tri_domain
        self.boundary = boundary
        self.geometry = geometry
        self.h = h

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def n_triangles(self):
        return len(self.triangles)

    def triangle_areas(self):
        p = self.nodes[self.triangles]
        return 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                      - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1]))

    def domain_triangles(self, domain):
        if domain == "whole":
            return np.arange(self.n_triangles)
        want = FLUID if domain == "fluid" else POROUS
        return np.nonzero(self.tri_domain == want)[0]

    def tagged_edges(self, tag):
        """Return a list of ((a, b), normal, tangent) for the given tag."""
        if tag not in _TAGS:
            raise ValueError(f"unknown edge tag {tag!r}")
        b = self.boundary[tag]
        return [((int(e[0]), int(e[1])), b["normal"][i].copy(), b["tangent"][i].copy())
                for i, e in enumerate(b["nodes"])]


def _subdivisions(length, h):
    return max(1, int(round(length / h)))


def build_two_domain_mesh(geometry, h):
    """Triangulate both rectangles with target mesh size h.

    Each rectangle becomes an nx-by-ny grid of cells (counts rounded to the
    nearest integer >= 1), every cell split by its lower-left to upper-right
    diagonal.  Interface nodes are shared; porous nodes are numbered first,
    lexicographically by (y, x).
    """
    if h <= 0:
        raise ValueError("mesh size h must be positive")

    fx0, fx1, fy0, fy1 = geometry.fluid_rect
    px0, px1, py0, py1 = geometry.porous_rect

    node_ids = {}
    coords = []

    def key(x, y):
        return (round(x, 12), round(y, 12))

    def add_nodes(rect):
        x0, x1, y0, y1 = rect
        nx = _subdivisions(x1 - x0, h)
        ny = _subdivisions(y1 - y0, h)
        xs = np.linspace(x0, x1, nx + 1)
        ys = np.linspace(y0, y1, ny + 1)
        grid = np.empty((ny + 1, nx + 1), dtype=np.int64)
        for j, y in enumerate(ys):
            for i, x in enumerate(xs):
                k = key(x, y)
                if k not in node_ids:
                    node_ids[k] = len(coords)
                    coords.append((x, y))
                grid[j, i] = node_ids[k]
        return grid, nx, ny

    # porous first so interface node ids are contiguous with the porous block
    pgrid, pnx, pny = add_nodes(geometry.porous_rect)
    fgrid, fnx, fny = add_nodes(geometry.fluid_rect)

    if geometry.interface_axis == "y" and pnx != fnx:
        raise GeometryError("interface subdivision mismatch")
    if geometry.interface_axis == "x" and pny != fny:
        raise GeometryError("interface subdivision mismatch")

    triangles = []
    tri_domain = []

    def add_cells(grid, nx, ny, domain):
        for j in range(ny):
            for i in range(nx):
                ll, lr = grid[j, i], grid[j, i + 1]
                ul, ur = grid[j + 1, i], grid[j + 1, i + 1]
                triangles.append((ll, lr, ur))
                triangles.append((ll, ur, ul))
                tri_domain.extend((domain, domain))

    add_cells(pgrid, pnx, pny, POROUS)
    add_cells(fgrid, fnx, fny, FLUID)

    nodes = np.array(coords, dtype=float)
    triangles = np.array(triangles, dtype=np.int64)
    tri_domain = np.array(tri_domain, dtype=np.int8)

    boundary = _tag_boundary(nodes, triangles, tri_domain, geometry)
    return Mesh(nodes, triangles, tri_domain, boundary, geometry, h)


def _tag_boundary(nodes, triangles, tri_domain, geometry):
    # boundary edges appear in exactly one triangle; interface edges appear in
    # one fluid and one porous triangle
    edge_tris = {}
    for t, tri in enumerate(triangles):
        for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
            e = (min(a, b), max(a, b))
            edge_tris.setdefault(e, []).append(t)

    n_if = geometry.normal
    tangent_if = np.array([-n_if[1], n_if[0]])

    tagged = {tag: {"nodes": [], "normal": [], "tangent": [],
                    "length": []} for tag in _TAGS}
    tagged[INTERFACE]["fluid_tri"] = []
    tagged[INTERFACE]["porous_tri"] = []

    axis = 0 if geometry.interface_axis == "x" else 1
    coord = geometry.interface_coord
    tol = 1e-10 * max(1.0, abs(coord))

    for (a, b), tris in edge_tris.items():
        if len(tris) == 2:
            da, db = tri_domain[tris[0]], tri_domain[tris[1]]
            if da == db:
                continue  # interior edge
            pa, pb = nodes[a], nodes[b]
            if not (abs(pa[axis] - coord) <= tol and abs(pb[axis] - coord) <= tol):
                continue
            ft, pt = (tris[0], tris[1]) if da == FLUID else (tris[1], tris[0])
            # order endpoints along the tangent direction
            if np.dot(pb - pa, tangent_if) < 0:
                a, b = b, a
            rec = tagged[INTERFACE]
            rec["nodes"].append((a, b))
            rec["normal"].append(n_if)
            rec["tangent"].append(tangent_if)
            rec["length"].append(float(np.linalg.norm(nodes[b] - nodes[a])))
            rec["fluid_tri"].append(ft)
            rec["porous_tri"].append(pt)
            continue
        # true boundary edge: outward normal from the owning triangle
        t = tris[0]
        tri = triangles[t]
        c = [v for v in tri if v != a and v != b][0]
        pa, pb, pc = nodes[a], nodes[b], nodes[c]
        edge = pb - pa
        ln = float(np.linalg.norm(edge))
        tau = edge / ln
        nrm = np.array([tau[1], -tau[0]])
        if np.dot(nrm, pc - pa) > 0:
            nrm = -nrm
        # keep tangent = normal rotated by +90 degrees
        tau = np.array([-nrm[1], nrm[0]])
        if np.dot(pb - pa, tau) < 0:
            a, b = b, a
        tag = GAMMA_F if tri_domain[t] == FLUID else GAMMA_P
        rec = tagged[tag]
        rec["nodes"].append((a, b))
        rec["normal"].append(nrm)
        rec["tangent"].append(tau)
        rec["length"].append(ln)

    for tag in _TAGS:
        rec = tagged[tag]
        rec["nodes"] = np.array(rec["nodes"], dtype=np.int64).reshape(-1, 2)
        rec["normal"] = np.array(rec["normal"], dtype=float).reshape(-1, 2)
        rec["tangent"] = np.array(rec["tangent"], dtype=float).reshape(-1, 2)
        rec["length"] = np.array(rec["length"], dtype=float)
        if tag == INTERFACE:
            rec["fluid_tri"] = np.array(rec["fluid_tri"], dtype=np.int64)
            rec["porous_tri"] = np.array(rec["porous_tri"], dtype=np.int64)

    return tagged
