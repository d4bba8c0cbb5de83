"""Assembly of the bilinear, trilinear and interface forms of the coupled model.

All volume terms use a degree-5 triangle rule (exact for the quintic
integrands of the convection terms with quadratic velocities); interface
terms use a degree-7 edge rule so that the cubic-in-u boundary integrands of
the convection forms are integrated exactly and the discrete skew identities
hold to roundoff.

Convention: trilinear convection terms are assembled as right-hand-side
vectors (the schemes treat convection explicitly), never as operators.
"""

import numpy as np

from . import sparse
from .elements import quadrature_rule, _basis_tables, edge_trace_basis

VOLUME_DEGREE = 5
EDGE_DEGREE = 7


class FormCoefficients:
    """Physical and numerical parameters shared by the assembly routines.

    K may be a scalar (isotropic), a constant 2x2 SPD tensor, or a per-triangle
    (n, 2, 2) array aligned with the porous domain's triangle list.
    """

    def __init__(self, nu=1.0, g=1.0, s0=1.0, K=1.0, alpha=1.0,
                 nu_f=None, nu_p=None, chi=None, lam=None, eps=None,
                 mobility=None, buoyancy=None):
        if nu <= 0 or g <= 0 or s0 <= 0:
            raise ValueError("nu, g and s0 must be positive")
        for name, val in (("nu_f", nu_f), ("nu_p", nu_p), ("chi", chi),
                          ("lam", lam), ("eps", eps)):
            if val is not None and val <= 0:
                raise ValueError(f"{name} must be positive")
        self.nu = nu
        self.g = g
        self.s0 = s0
        self.K = K
        self.alpha = alpha
        self.nu_f = nu_f
        self.nu_p = nu_p
        self.chi = chi
        self.lam = lam
        self.eps = eps
        self.mobility = mobility
        self.buoyancy = None if buoyancy is None else np.asarray(buoyancy, float)

    def k_tensor(self, n_tris):
        """Hydraulic conductivity as an (n_tris, 2, 2) array; checks SPD."""
        K = self.K
        if np.isscalar(K):
            K = np.array([[K, 0.0], [0.0, K]])
        K = np.asarray(K, dtype=float)
        if K.shape == (2, 2):
            K = np.broadcast_to(K, (n_tris, 2, 2)).copy()
        if K.shape != (n_tris, 2, 2):
            raise ValueError("K must be scalar, 2x2 or per-porous-triangle")
        if not np.allclose(K[:, 0, 1], K[:, 1, 0]):
            raise ValueError("K must be symmetric")
        tr = K[:, 0, 0] + K[:, 1, 1]
        det = K[:, 0, 0] * K[:, 1, 1] - K[:, 0, 1] * K[:, 1, 0]
        if np.any(tr <= 0) or np.any(det <= 0):
            raise ValueError("K must be positive definite on every triangle")
        return K

    def k_inverse(self, n_tris):
        K = self.k_tensor(n_tris)
        det = K[:, 0, 0] * K[:, 1, 1] - K[:, 0, 1] * K[:, 1, 0]
        inv = np.empty_like(K)
        inv[:, 0, 0] = K[:, 1, 1]
        inv[:, 1, 1] = K[:, 0, 0]
        inv[:, 0, 1] = -K[:, 0, 1]
        inv[:, 1, 0] = -K[:, 1, 0]
        return inv / det[:, None, None]

    def bjs_edge_coefficients(self, mesh, model="nsd"):
        """Slip coefficient per interface edge; tr(K) is taken from the porous
        triangle whose closure contains the edge."""
        porous = mesh.domain_triangles("porous")
        row = np.full(mesh.n_triangles, -1, dtype=np.int64)
        row[porous] = np.arange(len(porous))
        K = self.k_tensor(len(porous))
        ptri = mesh.boundary["interface"]["porous_tri"]
        trk = K[row[ptri], 0, 0] + K[row[ptri], 1, 1]
        if np.any(trk <= 0):
            raise ValueError("tr(K) must be positive on interface triangles")
        if model == "nsd":
            return self.alpha * np.sqrt(self.nu * self.g / trk)
        if model == "chnsd":
            return self.alpha * self.nu_f * np.sqrt(2.0) / np.sqrt(self.nu_p * trk)
        raise ValueError(f"unknown model {model!r}")


# ---------------------------------------------------------------------------
# cached tables
# ---------------------------------------------------------------------------

def _volume_tables(dm, degree=VOLUME_DEGREE):
    cache = getattr(dm, "_vol_tables", None)
    if cache is None:
        cache = dm._vol_tables = {}
    if degree not in cache:
        qr = quadrature_rule("triangle", degree)
        vals, ref_grads = _basis_tables(dm.family, qr.points)
        verts, jac, jinv, det = dm.geometry_tables()
        # physical gradient: grad_x phi = J^{-T} grad_ref phi
        grads = np.einsum("qle,ted->tqld", ref_grads, jinv)
        detw = det[:, None] * qr.weights[None, :]
        xq = np.einsum("qi,tid->tqd", qr.points, verts)
        cache[degree] = (qr, vals, grads, detw, xq)
    return cache[degree]


def _edge_tables(dm, tag, degree=EDGE_DEGREE):
    cache = getattr(dm, "_edge_tables", None)
    if cache is None:
        cache = dm._edge_tables = {}
    key = (tag, degree)
    if key not in cache:
        qr = quadrature_rule("edge", degree)
        tr = edge_trace_basis(dm.family, qr.points)
        b = dm.mesh.boundary[tag]
        edofs = dm.edge_dofs(tag)
        pa = dm.mesh.nodes[b["nodes"][:, 0]]
        pb = dm.mesh.nodes[b["nodes"][:, 1]]
        xq = pa[:, None, :] + qr.points[None, :, None] * (pb - pa)[:, None, :]
        cache[key] = (qr, tr, edofs, b["length"], b["normal"], b["tangent"], xq)
    return cache[key]


def _scatter(m, n, rows, cols, loc):
    return sparse.assemble_from_triplets(m, n, rows.ravel(), cols.ravel(), loc.ravel())


def _expand_vector_blocks(loc, comps):
    """Scalar element matrices (nt, a, b) -> block-diagonal (nt, a*c, b*c)."""
    nt, a, b = loc.shape
    eye = np.eye(comps)
    out = loc[:, :, None, :, None] * eye[None, None, :, None, :]
    return out.reshape(nt, a * comps, b * comps)


def _pair_indices(dofs_rows, dofs_cols):
    rows = np.repeat(dofs_rows[:, :, None], dofs_cols.shape[1], axis=2)
    cols = np.repeat(dofs_cols[:, None, :], dofs_rows.shape[1], axis=1)
    return rows, cols


# ---------------------------------------------------------------------------
# field evaluation
# ---------------------------------------------------------------------------

def eval_field(field, tri_ids, qr_points, need_grad=False):
    """Field values (and gradients) at barycentric points of given mesh triangles.

    Returns values with shape (nt, nq) for scalars or (nt, nq, 2) for vectors;
    gradients have a trailing derivative axis.
    """
    dm = field.dofmap
    rows = dm.row_of_tri[tri_ids]
    if np.any(rows < 0):
        raise ValueError("field is not defined on the requested triangles")
    vals, ref_grads = _basis_tables(dm.family, qr_points)
    cd = dm.cell_dofs[rows]
    comps = dm.components
    C = field.coefficients[cd].reshape(len(rows), dm.n_local, comps)
    if comps == 1:
        out = np.einsum("ql,tl->tq", vals, C[:, :, 0])
    else:
        out = np.einsum("ql,tlc->tqc", vals, C)
    if not need_grad:
        return out
    verts, jac, jinv, det = _tri_geometry(dm.mesh, tri_ids)
    grads = np.einsum("qle,ted->tqld", ref_grads, jinv)
    if comps == 1:
        g = np.einsum("tqld,tl->tqd", grads, C[:, :, 0])
    else:
        g = np.einsum("tqld,tlc->tqcd", grads, C)
    return out, g


def _tri_geometry(mesh, tri_ids):
    p = mesh.nodes[mesh.triangles[tri_ids]]
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
    return p, jac, inv, det


def eval_edge_trace(field, tag, qr_points):
    """Trace values of a field on tagged edges at parameter points s."""
    dm = field.dofmap
    tr = edge_trace_basis(dm.family, qr_points)
    edofs = dm.edge_dofs(tag)
    comps = dm.components
    ntr = tr.shape[1]
    C = field.coefficients[edofs].reshape(len(edofs), ntr, comps)
    if comps == 1:
        return np.einsum("qk,tk->tq", tr, C[:, :, 0])
    return np.einsum("qk,tkc->tqc", tr, C)


# ---------------------------------------------------------------------------
# volume matrices
# ---------------------------------------------------------------------------

def mass_matrix(space, weight=1.0):
    """(w u, v): symmetric mass matrix, block-diagonal over components."""
    qr, vals, grads, detw, xq = _volume_tables(space)
    loc = weight * np.einsum("tq,qi,qj->tij", detw, vals, vals)
    if space.components > 1:
        loc = _expand_vector_blocks(loc, space.components)
    rows, cols = _pair_indices(space.cell_dofs, space.cell_dofs)
    return _scatter(space.total_dofs, space.total_dofs, rows, cols, loc)


def stiffness_matrix(space, coeff=1.0):
    """(coeff grad u, grad v).

    Scalar spaces accept a scalar, a 2x2 SPD tensor or a per-triangle (n,2,2)
    tensor; vector spaces take a scalar viscosity (full-gradient contraction).
    """
    qr, vals, grads, detw, xq = _volume_tables(space)
    nt = len(space.tri_ids)
    if space.components == 1 and not np.isscalar(coeff):
        K = np.asarray(coeff, dtype=float)
        if K.shape == (2, 2):
            K = np.broadcast_to(K, (nt, 2, 2))
        if K.shape != (nt, 2, 2):
            raise ValueError("tensor coefficient must be 2x2 or per-triangle")
        tr = K[:, 0, 0] + K[:, 1, 1]
        det = K[:, 0, 0] * K[:, 1, 1] - K[:, 0, 1] * K[:, 1, 0]
        if np.any(tr <= 0) or np.any(det <= 0):
            raise ValueError("tensor coefficient must be SPD")
        loc = np.einsum("tq,tde,tqje,tqid->tij", detw, K, grads, grads)
        rows, cols = _pair_indices(space.cell_dofs, space.cell_dofs)
        return _scatter(space.total_dofs, space.total_dofs, rows, cols, loc)
    if not np.isscalar(coeff):
        raise ValueError("vector spaces take a scalar diffusion coefficient")
    loc = coeff * np.einsum("tq,tqid,tqjd->tij", detw, grads, grads)
    if space.components > 1:
        loc = _expand_vector_blocks(loc, space.components)
    rows, cols = _pair_indices(space.cell_dofs, space.cell_dofs)
    return _scatter(space.total_dofs, space.total_dofs, rows, cols, loc)


def weighted_stiffness_matrix(space, weight_qp):
    """(w(x) grad u, grad v) with a per-quadrature-point scalar weight."""
    qr, vals, grads, detw, xq = _volume_tables(space)
    loc = np.einsum("tq,tq,tqid,tqjd->tij", detw, weight_qp, grads, grads)
    rows, cols = _pair_indices(space.cell_dofs, space.cell_dofs)
    return _scatter(space.total_dofs, space.total_dofs, rows, cols, loc)


def tensor_mass_matrix(space, tensor):
    """((T u), v) for a vector space with per-triangle 2x2 tensor T."""
    qr, vals, grads, detw, xq = _volume_tables(space)
    nt = len(space.tri_ids)
    T = np.asarray(tensor, dtype=float)
    if T.shape == (2, 2):
        T = np.broadcast_to(T, (nt, 2, 2))
    base = np.einsum("tq,qi,qj->tij", detw, vals, vals)
    loc = np.einsum("tij,tcd->ticjd", base, T).reshape(nt, 2 * vals.shape[1],
                                                       2 * vals.shape[1])
    rows, cols = _pair_indices(space.cell_dofs, space.cell_dofs)
    return _scatter(space.total_dofs, space.total_dofs, rows, cols, loc)


def divergence_matrix(velocity_space, pressure_space):
    """Entry (q, v) = (q, div v) on the shared domain."""
    if velocity_space.mesh is not pressure_space.mesh:
        raise ValueError("spaces live on different meshes")
    if not np.array_equal(velocity_space.tri_ids, pressure_space.tri_ids):
        raise ValueError("velocity and pressure spaces cover different triangles")
    qr, vvals, vgrads, detw, xq = _volume_tables(velocity_space)
    pvals, _ = _basis_tables(pressure_space.family, qr.points)
    # columns: velocity dof (l, c) -> d_c phi_l
    loc = np.einsum("tq,qi,tqlc->tilc", detw, pvals, vgrads)
    nt, nlocp, nlocv = loc.shape[0], pvals.shape[1], vvals.shape[1]
    loc = loc.reshape(nt, nlocp, nlocv * 2)
    rows, cols = _pair_indices(pressure_space.cell_dofs, velocity_space.cell_dofs)
    return _scatter(pressure_space.total_dofs, velocity_space.total_dofs,
                    rows, cols, loc)


def gradient_matrix(velocity_space, scalar_space):
    """Entry (v, q) = (grad q, v): pressure-gradient coupling for Darcy flow."""
    if not np.array_equal(velocity_space.tri_ids, scalar_space.tri_ids):
        raise ValueError("spaces cover different triangles")
    qr, vvals, vgrads, detw, xq = _volume_tables(velocity_space)
    pvals, pref = _basis_tables(scalar_space.family, qr.points)
    _, _, jinv, _ = _tri_geometry(velocity_space.mesh, velocity_space.tri_ids)
    pgrads = np.einsum("qle,ted->tqld", pref, jinv)
    loc = np.einsum("tq,ql,tqic->tlci", detw, vvals, pgrads)
    nt = loc.shape[0]
    loc = loc.reshape(nt, vvals.shape[1] * 2, pvals.shape[1])
    rows, cols = _pair_indices(velocity_space.cell_dofs, scalar_space.cell_dofs)
    return _scatter(velocity_space.total_dofs, scalar_space.total_dofs,
                    rows, cols, loc)


# ---------------------------------------------------------------------------
# interface matrices
# ---------------------------------------------------------------------------

def interface_tangential_matrix(space, edge_coefficients):
    """sum_e c_e int_e (u.tau)(v.tau) ds over the interface."""
    qr, tr, edofs, lens, normals, taus, xq = _edge_tables(space, "interface")
    ne, ntr = len(lens), tr.shape[1]
    base = np.einsum("q,qk,ql->kl", qr.weights, tr, tr)
    loc = (edge_coefficients * lens)[:, None, None, None, None] \
        * base[None, :, None, :, None] \
        * np.einsum("ec,ed->ecd", taus, taus)[:, None, :, None, :]
    loc = loc.reshape(ne, ntr * 2, ntr * 2)
    rows, cols = _pair_indices(edofs, edofs)
    return _scatter(space.total_dofs, space.total_dofs, rows, cols, loc)


def bjs_matrix(fluid_velocity_space, coeffs, model="nsd"):
    """Beavers-Joseph-Saffman slip penalty on the interface."""
    c = coeffs.bjs_edge_coefficients(fluid_velocity_space.mesh, model=model)
    return interface_tangential_matrix(fluid_velocity_space, c)


def cgamma_matrix(fluid_velocity_space, head_space, g=1.0):
    """Entry (v, phi) = g int_Gamma phi (v.n) ds, n oriented fluid -> porous."""
    qr, trv, vdofs, lens, normals, taus, xq = _edge_tables(
        fluid_velocity_space, "interface")
    trh = edge_trace_basis(head_space.family, qr.points)
    hdofs = head_space.edge_dofs("interface")
    ne = len(lens)
    base = np.einsum("q,qk,qm->km", qr.weights, trv, trh)
    loc = (g * lens)[:, None, None, None] * base[None, :, None, :] \
        * normals[:, None, :, None]
    loc = loc.reshape(ne, trv.shape[1] * 2, trh.shape[1])
    rows, cols = _pair_indices(vdofs, hdofs)
    return _scatter(fluid_velocity_space.total_dofs, head_space.total_dofs,
                    rows, cols, loc)


def interface_flux_vector(head_space, velocity_field):
    """b_q = int_Gamma (u.n) psi_q ds with u from the fluid side."""
    qr, trh_tab, hdofs, lens, normals, taus, xq = _edge_tables(
        head_space, "interface")
    uvals = eval_edge_trace(velocity_field, "interface", qr.points)
    un = np.einsum("eqc,ec->eq", uvals, normals)
    loc = lens[:, None] * np.einsum("q,eq,qk->ek", qr.weights, un, trh_tab)
    out = np.zeros(head_space.total_dofs)
    np.add.at(out, hdofs.ravel(), loc.ravel())
    return out


def edge_load_vector(space, tag, fn, t, direction="tangent"):
    """int_e f(x, t) (v.dir) ds accumulated over tagged edges (vector spaces)."""
    qr, tr, edofs, lens, normals, taus, xq = _edge_tables(space, tag)
    vec = taus if direction == "tangent" else normals
    F = np.asarray(fn(xq[:, :, 0], xq[:, :, 1], t), dtype=float)
    loc = lens[:, None, None] * np.einsum("q,eq,qk,ec->ekc", qr.weights, F, tr, vec)
    out = np.zeros(space.total_dofs)
    np.add.at(out, edofs.ravel(), loc.reshape(len(lens), -1).ravel())
    return out


# ---------------------------------------------------------------------------
# convection vectors
# ---------------------------------------------------------------------------

def _interface_kinetic_flux(u, target_space, factor):
    """factor * int_Gamma (u.u) (w.n) ds as a vector over the target space."""
    qr, tr, edofs, lens, normals, taus, xq = _edge_tables(target_space, "interface")
    uvals = eval_edge_trace(u, "interface", qr.points)
    uu = np.einsum("eqc,eqc->eq", uvals, uvals)
    loc = factor * lens[:, None, None] * np.einsum(
        "q,eq,qk,ec->ekc", qr.weights, uu, tr, normals)
    out = np.zeros(target_space.total_dofs)
    np.add.at(out, edofs.ravel(), loc.reshape(len(lens), -1).ravel())
    return out


def convection_vector_a(u, target_space):
    """w -> ((u.grad)u, w) - 1/2 int_Gamma (u.u)(w.n) ds."""
    qr, vals, grads, detw, xq = _volume_tables(target_space)
    uvals, ugrads = eval_field(u, target_space.tri_ids, qr.points, need_grad=True)
    # (u.grad)u_c = sum_d u_d d_d u_c
    adv = np.einsum("tqd,tqcd->tqc", uvals, ugrads)
    loc = np.einsum("tq,tqc,ql->tlc", detw, adv, vals)
    out = np.zeros(target_space.total_dofs)
    np.add.at(out, target_space.cell_dofs.ravel(),
              loc.reshape(loc.shape[0], -1).ravel())
    out += _interface_kinetic_flux(u, target_space, -0.5)
    return out


def convection_vector_b(u, target_space):
    """w -> (2 D(u) u, w) + ((div u) u, w) - int_Gamma (u.u)(w.n) ds."""
    qr, vals, grads, detw, xq = _volume_tables(target_space)
    uvals, ugrads = eval_field(u, target_space.tri_ids, qr.points, need_grad=True)
    sym = ugrads + np.swapaxes(ugrads, 2, 3)          # 2 D(u)
    div = ugrads[:, :, 0, 0] + ugrads[:, :, 1, 1]
    adv = np.einsum("tqcd,tqd->tqc", sym, uvals) + div[:, :, None] * uvals
    loc = np.einsum("tq,tqc,ql->tlc", detw, adv, vals)
    out = np.zeros(target_space.total_dofs)
    np.add.at(out, target_space.cell_dofs.ravel(),
              loc.reshape(loc.shape[0], -1).ravel())
    out += _interface_kinetic_flux(u, target_space, -1.0)
    return out


# ---------------------------------------------------------------------------
# load and coupling vectors
# ---------------------------------------------------------------------------

def load_vector(f, space, t=0.0, degree=VOLUME_DEGREE):
    """Component i = int f . basis_i over the space's domain."""
    qr, vals, grads, detw, xq = _volume_tables(space, degree)
    out = np.zeros(space.total_dofs)
    if space.components == 1:
        F = np.asarray(f(xq[:, :, 0], xq[:, :, 1], t), dtype=float)
        F = np.broadcast_to(F, detw.shape)
        loc = np.einsum("tq,tq,ql->tl", detw, F, vals)
    else:
        fx, fy = f(xq[:, :, 0], xq[:, :, 1], t)
        F = np.stack([np.broadcast_to(np.asarray(fx, float), detw.shape),
                      np.broadcast_to(np.asarray(fy, float), detw.shape)], axis=-1)
        loc = np.einsum("tq,tqc,ql->tlc", detw, F, vals).reshape(len(detw), -1)
    np.add.at(out, space.cell_dofs.ravel(), loc.ravel())
    return out


def phase_coupling_vector(phi, mu, velocity_space):
    """w -> (phi grad mu, w) restricted to the velocity space's domain."""
    qr, vals, grads, detw, xq = _volume_tables(velocity_space)
    pvals = eval_field(phi, velocity_space.tri_ids, qr.points)
    _, mgrads = eval_field(mu, velocity_space.tri_ids, qr.points, need_grad=True)
    loc = np.einsum("tq,tq,tqc,ql->tlc", detw, pvals, mgrads, vals)
    out = np.zeros(velocity_space.total_dofs)
    np.add.at(out, velocity_space.cell_dofs.ravel(),
              loc.reshape(loc.shape[0], -1).ravel())
    return out


def transport_vector(phi, velocity_fields, target_space):
    """psi -> (u phi, grad psi) with one velocity field per subdomain.

    velocity_fields maps 'fluid'/'porous' to the transporting Field; the
    target space spans the whole mesh.
    """
    qr = quadrature_rule("triangle", VOLUME_DEGREE)
    out = np.zeros(target_space.total_dofs)
    for domain, u in velocity_fields.items():
        tri_ids = target_space.mesh.domain_triangles(domain)
        rows = target_space.row_of_tri[tri_ids]
        vals, ref = _basis_tables(target_space.family, qr.points)
        _, jac, jinv, det = _tri_geometry(target_space.mesh, tri_ids)
        tgrads = np.einsum("qle,ted->tqld", ref, jinv)
        detw = det[:, None] * qr.weights[None, :]
        pvals = eval_field(phi, tri_ids, qr.points)
        uvals = eval_field(u, tri_ids, qr.points)
        loc = np.einsum("tq,tq,tqc,tqlc->tl", detw, pvals, uvals, tgrads)
        np.add.at(out, target_space.cell_dofs[rows].ravel(), loc.ravel())
    return out


def buoyancy_vector(velocity_space, phi, b_vec, phi_mean):
    """w -> (B (phi - phibar), w) over the velocity space's domain."""
    qr, vals, grads, detw, xq = _volume_tables(velocity_space)
    pvals = eval_field(phi, velocity_space.tri_ids, qr.points) - phi_mean
    loc = np.einsum("tq,tq,c,ql->tlc", detw, pvals, np.asarray(b_vec, float), vals)
    out = np.zeros(velocity_space.total_dofs)
    np.add.at(out, velocity_space.cell_dofs.ravel(),
              loc.reshape(loc.shape[0], -1).ravel())
    return out


def function_load_vector(space, values_qp):
    """int f psi_i with f given directly at the volume quadrature points."""
    qr, vals, grads, detw, xq = _volume_tables(space)
    loc = np.einsum("tq,tq,ql->tl", detw, values_qp, vals)
    out = np.zeros(space.total_dofs)
    np.add.at(out, space.cell_dofs.ravel(), loc.ravel())
    return out


def integrate_qp(space, values_qp):
    """Integral of a quantity sampled at the volume quadrature points."""
    qr, vals, grads, detw, xq = _volume_tables(space)
    return float(np.einsum("tq,tq->", detw, values_qp))


def field_values_qp(space, field, need_grad=False):
    """Values of a field at the space's volume quadrature points."""
    qr, vals, grads, detw, xq = _volume_tables(space)
    return eval_field(field, space.tri_ids, qr.points, need_grad=need_grad)


def quadrature_points(space):
    qr, vals, grads, detw, xq = _volume_tables(space)
    return xq, detw
