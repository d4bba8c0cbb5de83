"""Brute-force reference assembly and forcing cross-checks.

The dense oracle rebuilds every form by looping over triangles, quadrature
points and *all pairs of global basis functions* in plain Python, without any
of the vectorized scatter machinery; on tiny meshes (<= 8 triangles) the
sparse assembly must agree entry-for-entry to 1e-12.  The forcing oracle
checks the symbolically derived manufactured source terms against high-order
finite differences of the closed-form fields.
"""

import numpy as np

from . import forms
from .elements import (P1, P2, build_dof_map, reference_basis,
                       edge_trace_basis, quadrature_rule, Field)
from .mesh import Geometry, build_two_domain_mesh


def _tri_geom(mesh, t):
    p = mesh.nodes[mesh.triangles[t]]
    j = np.array([[p[1, 0] - p[0, 0], p[2, 0] - p[0, 0]],
                  [p[1, 1] - p[0, 1], p[2, 1] - p[0, 1]]])
    det = j[0, 0] * j[1, 1] - j[0, 1] * j[1, 0]
    jinv = np.array([[j[1, 1], -j[0, 1]], [-j[1, 0], j[0, 0]]]) / det
    return p, j, jinv, det


def _basis_at(dm, lam):
    vals, ref_grads = reference_basis(dm.family, lam)
    return vals, ref_grads


class DenseOracle:
    """Slow reference integrals over one dof map (and optional partners)."""

    def __init__(self, dm, degree=forms.VOLUME_DEGREE):
        self.dm = dm
        self.qr = quadrature_rule("triangle", degree)

    def _loop(self):
        dm = self.dm
        for row, t in enumerate(dm.tri_ids):
            p, j, jinv, det = _tri_geom(dm.mesh, t)
            for q, lam in enumerate(self.qr.points):
                x = lam @ p
                w = self.qr.weights[q] * det
                yield row, t, lam, x, w, jinv

    def _dof(self, row, l, c):
        return self.dm.cell_dofs[row, l * self.dm.components + c]

    def mass(self, weight=1.0):
        dm = self.dm
        n = dm.total_dofs
        out = np.zeros((n, n))
        for row, t, lam, x, w, jinv in self._loop():
            vals, _ = _basis_at(dm, lam)
            for a in range(dm.n_local):
                for b in range(dm.n_local):
                    for c in range(dm.components):
                        out[self._dof(row, a, c), self._dof(row, b, c)] += \
                            weight * w * vals[a] * vals[b]
        return out

    def stiffness(self, coeff=1.0):
        dm = self.dm
        n = dm.total_dofs
        out = np.zeros((n, n))
        per_tri = not np.isscalar(coeff) and np.asarray(coeff).ndim == 3
        for row, t, lam, x, w, jinv in self._loop():
            _, ref = _basis_at(dm, lam)
            g = ref @ jinv          # physical gradients, rows = local nodes
            if np.isscalar(coeff):
                kmat = coeff * np.eye(2)
            else:
                kmat = np.asarray(coeff)[row] if per_tri else np.asarray(coeff)
            for a in range(dm.n_local):
                for b in range(dm.n_local):
                    val = w * g[a] @ (kmat @ g[b])
                    for c in range(dm.components):
                        out[self._dof(row, a, c), self._dof(row, b, c)] += val
        return out

    def weighted_stiffness(self, weight_fn):
        dm = self.dm
        n = dm.total_dofs
        out = np.zeros((n, n))
        for row, t, lam, x, w, jinv in self._loop():
            _, ref = _basis_at(dm, lam)
            g = ref @ jinv
            wq = float(weight_fn(x[0], x[1]))
            for a in range(dm.n_local):
                for b in range(dm.n_local):
                    out[self._dof(row, a, 0), self._dof(row, b, 0)] += \
                        w * wq * (g[a] @ g[b])
        return out

    def tensor_mass(self, tensor):
        dm = self.dm
        n = dm.total_dofs
        out = np.zeros((n, n))
        per_tri = np.asarray(tensor).ndim == 3
        for row, t, lam, x, w, jinv in self._loop():
            vals, _ = _basis_at(dm, lam)
            tm = np.asarray(tensor)[row] if per_tri else np.asarray(tensor)
            for a in range(dm.n_local):
                for b in range(dm.n_local):
                    for c in range(2):
                        for d in range(2):
                            out[self._dof(row, a, c), self._dof(row, b, d)] += \
                                w * tm[c, d] * vals[a] * vals[b]
        return out

    def divergence(self, pressure_dm):
        vdm = self.dm
        out = np.zeros((pressure_dm.total_dofs, vdm.total_dofs))
        for row, t, lam, x, w, jinv in self._loop():
            vvals, vref = _basis_at(vdm, lam)
            pvals, _ = _basis_at(pressure_dm, lam)
            g = vref @ jinv
            for i in range(pressure_dm.n_local):
                pi = pressure_dm.cell_dofs[row, i]
                for l in range(vdm.n_local):
                    for c in range(2):
                        out[pi, self._dof(row, l, c)] += w * pvals[i] * g[l, c]
        return out

    def gradient(self, scalar_dm):
        vdm = self.dm
        out = np.zeros((vdm.total_dofs, scalar_dm.total_dofs))
        for row, t, lam, x, w, jinv in self._loop():
            vvals, _ = _basis_at(vdm, lam)
            _, sref = _basis_at(scalar_dm, lam)
            sg = sref @ jinv
            for l in range(vdm.n_local):
                for c in range(2):
                    for i in range(scalar_dm.n_local):
                        out[self._dof(row, l, c), scalar_dm.cell_dofs[row, i]] += \
                            w * vvals[l] * sg[i, c]
        return out

    def load(self, f, t=0.0):
        dm = self.dm
        out = np.zeros(dm.total_dofs)
        for row, tt, lam, x, w, jinv in self._loop():
            vals, _ = _basis_at(dm, lam)
            fv = f(np.array(x[0]), np.array(x[1]), t)
            if dm.components == 1:
                for a in range(dm.n_local):
                    out[self._dof(row, a, 0)] += w * float(fv) * vals[a]
            else:
                for a in range(dm.n_local):
                    for c in range(2):
                        out[self._dof(row, a, c)] += w * float(fv[c]) * vals[a]
        return out

    def _field_at(self, field, row, lam):
        dm = field.dofmap
        r = dm.row_of_tri[self.dm.tri_ids[row]]
        vals, ref = _basis_at(dm, lam)
        _, _, jinv, _ = _tri_geom(dm.mesh, self.dm.tri_ids[row])
        g = ref @ jinv
        comps = dm.components
        val = np.zeros(comps)
        grad = np.zeros((comps, 2))
        for l in range(dm.n_local):
            for c in range(comps):
                coef = field.coefficients[dm.cell_dofs[r, l * comps + c]]
                val[c] += coef * vals[l]
                grad[c] += coef * g[l]
        return (val[0], grad[0]) if comps == 1 else (val, grad)

    def convection(self, u, form="a"):
        dm = self.dm
        out = np.zeros(dm.total_dofs)
        for row, t, lam, x, w, jinv in self._loop():
            vals, _ = _basis_at(dm, lam)
            uval, ugrad = self._field_at(u, row, lam)
            if form == "a":
                adv = ugrad @ uval                      # (u.grad)u
            else:
                sym = ugrad + ugrad.T
                adv = sym @ uval + (ugrad[0, 0] + ugrad[1, 1]) * uval
            for a in range(dm.n_local):
                for c in range(2):
                    out[self._dof(row, a, c)] += w * adv[c] * vals[a]
        out += dense_interface_kinetic(self.dm, u,
                                       -0.5 if form == "a" else -1.0)
        return out

    def phase_coupling(self, phi, mu):
        dm = self.dm
        out = np.zeros(dm.total_dofs)
        for row, t, lam, x, w, jinv in self._loop():
            vals, _ = _basis_at(dm, lam)
            pv, _ = self._field_at(phi, row, lam)
            _, mg = self._field_at(mu, row, lam)
            for a in range(dm.n_local):
                for c in range(2):
                    out[self._dof(row, a, c)] += w * pv * mg[c] * vals[a]
        return out


def _edge_loop(dm, tag, degree=forms.EDGE_DEGREE):
    qr = quadrature_rule("edge", degree)
    b = dm.mesh.boundary[tag]
    edofs = dm.edge_dofs(tag)
    for e, (a, bb) in enumerate(b["nodes"]):
        pa, pb = dm.mesh.nodes[a], dm.mesh.nodes[bb]
        ln = b["length"][e]
        for q, s in enumerate(qr.points):
            x = pa + s * (pb - pa)
            w = qr.weights[q] * ln
            tr = edge_trace_basis(dm.family, np.array([s]))[0]
            yield e, edofs[e], x, w, tr, b["normal"][e], b["tangent"][e]


def dense_interface_tangential(dm, edge_coeffs):
    n = dm.total_dofs
    out = np.zeros((n, n))
    ntr = 2 if dm.family == P1 else 3
    for e, edofs, x, w, tr, nrm, tau in _edge_loop(dm, "interface"):
        for a in range(ntr):
            for b in range(ntr):
                for c in range(2):
                    for d in range(2):
                        out[edofs[a * 2 + c], edofs[b * 2 + d]] += \
                            edge_coeffs[e] * w * tr[a] * tr[b] * tau[c] * tau[d]
    return out


def dense_cgamma(vdm, hdm, g=1.0):
    out = np.zeros((vdm.total_dofs, hdm.total_dofs))
    hedofs = hdm.edge_dofs("interface")
    for e, vdofs, x, w, trv, nrm, tau in _edge_loop(vdm, "interface"):
        trh = edge_trace_basis(hdm.family, np.array([(x - vdm.mesh.nodes[
            vdm.mesh.boundary["interface"]["nodes"][e, 0]]) @ tau /
            vdm.mesh.boundary["interface"]["length"][e]]))[0]
        for a in range(3 if vdm.family == P2 else 2):
            for c in range(2):
                for b in range(len(trh)):
                    out[vdofs[a * 2 + c], hedofs[e, b]] += \
                        g * w * trv[a] * nrm[c] * trh[b]
    return out


def dense_interface_kinetic(dm, u, factor):
    out = np.zeros(dm.total_dofs)
    for e, edofs, x, w, tr, nrm, tau in _edge_loop(dm, "interface"):
        uval = np.zeros(2)
        uedofs = u.dofmap.edge_dofs("interface")[e]
        utr = tr if u.dofmap.family == dm.family else None
        for a in range(3 if u.dofmap.family == P2 else 2):
            for c in range(2):
                uval[c] += u.coefficients[uedofs[a * 2 + c]] * utr[a]
        uu = uval @ uval
        for a in range(3 if dm.family == P2 else 2):
            for c in range(2):
                out[edofs[a * 2 + c]] += factor * w * uu * tr[a] * nrm[c]
    return out


def dense_interface_flux(hdm, u):
    out = np.zeros(hdm.total_dofs)
    uedofs = u.dofmap.edge_dofs("interface")
    for e, hedofs, x, w, trh, nrm, tau in _edge_loop(hdm, "interface"):
        s = np.array([(x - hdm.mesh.nodes[
            hdm.mesh.boundary["interface"]["nodes"][e, 0]]) @ tau /
            hdm.mesh.boundary["interface"]["length"][e]])
        tru = edge_trace_basis(u.dofmap.family, s)[0]
        uval = np.zeros(2)
        for a in range(3 if u.dofmap.family == P2 else 2):
            for c in range(2):
                uval[c] += u.coefficients[uedofs[e, a * 2 + c]] * tru[a]
        un = uval @ nrm
        for b in range(len(trh)):
            out[hedofs[b]] += w * un * trh[b]
    return out


# ---------------------------------------------------------------------------
# checks
# ---------------------------------------------------------------------------

def _check(name, dense, assembled, failures, verbose, tol=1e-12):
    a = assembled.toarray() if hasattr(assembled, "toarray") else assembled
    scale = max(1.0, np.abs(dense).max())
    err = np.abs(dense - a).max() / scale
    ok = err <= tol
    if verbose:
        print(f"{'PASS' if ok else 'FAIL'}  {name:32s} max rel entry error {err:.2e}")
    if not ok:
        failures.append((name, err))


def oracle_meshes():
    m1 = build_two_domain_mesh(Geometry((0, 1, 0, 1), (0, 1, -1, 0)), 1.0)
    m2 = build_two_domain_mesh(Geometry((0, 2, 0, 1), (0, 2, -1, 0)), 1.0)
    return [("stacked-unit-squares", m1), ("stacked-2x1", m2)]


def run_assembly_checks(verbose=False):
    failures = []
    rng = np.random.default_rng(12345)
    for mesh_name, mesh in oracle_meshes():
        vf = build_dof_map(mesh, P2, 2, "fluid")
        qf = build_dof_map(mesh, P1, 1, "fluid")
        hp = build_dof_map(mesh, P1, 1, "porous")
        vp = build_dof_map(mesh, P2, 2, "porous")
        yw = build_dof_map(mesh, P1, 1, "whole")
        npor = len(hp.tri_ids)

        def nm(s):
            return f"{s} [{mesh_name}]"

        _check(nm("mass P1 fluid"), DenseOracle(qf).mass(),
               forms.mass_matrix(qf), failures, verbose)
        _check(nm("mass P2 vector fluid"), DenseOracle(vf).mass(),
               forms.mass_matrix(vf), failures, verbose)
        _check(nm("stiffness P1 porous"), DenseOracle(hp).stiffness(1.0),
               forms.stiffness_matrix(hp), failures, verbose)
        ktens = np.array([[2.0, 0.3], [0.3, 1.0]])
        _check(nm("tensor stiffness"), DenseOracle(hp).stiffness(ktens),
               forms.stiffness_matrix(hp, ktens), failures, verbose)
        kfield = np.tile(np.eye(2), (npor, 1, 1))
        kfield[:, 0, 0] = 1.0 + rng.random(npor)
        _check(nm("per-triangle stiffness"), DenseOracle(hp).stiffness(kfield),
               forms.stiffness_matrix(hp, kfield), failures, verbose)
        _check(nm("stiffness P2 vector"), DenseOracle(vf).stiffness(0.7),
               forms.stiffness_matrix(vf, 0.7), failures, verbose)
        wfn = lambda x, y: 1.0 + 0.5 * np.sin(x + 2 * y)
        dense_w = DenseOracle(yw).weighted_stiffness(wfn)
        xq, _ = forms.quadrature_points(yw)
        _check(nm("weighted stiffness"), dense_w,
               forms.weighted_stiffness_matrix(
                   yw, wfn(xq[:, :, 0], xq[:, :, 1])), failures, verbose)
        _check(nm("tensor mass porous"), DenseOracle(vp).tensor_mass(ktens),
               forms.tensor_mass_matrix(vp, ktens), failures, verbose)
        _check(nm("divergence"), DenseOracle(vf).divergence(qf),
               forms.divergence_matrix(vf, qf), failures, verbose)
        _check(nm("gradient"), DenseOracle(vp).gradient(hp),
               forms.gradient_matrix(vp, hp), failures, verbose)

        n_edges = len(mesh.boundary["interface"]["length"])
        ec = 0.5 + rng.random(n_edges)
        _check(nm("interface tangential"), dense_interface_tangential(vf, ec),
               forms.interface_tangential_matrix(vf, ec), failures, verbose)
        _check(nm("interface pressure coupling"), dense_cgamma(vf, hp, 1.3),
               forms.cgamma_matrix(vf, hp, 1.3), failures, verbose)

        u = Field(vf, rng.standard_normal(vf.total_dofs))
        _check(nm("convection a"), DenseOracle(vf).convection(u, "a"),
               forms.convection_vector_a(u, vf), failures, verbose)
        _check(nm("convection b"), DenseOracle(vf).convection(u, "b"),
               forms.convection_vector_b(u, vf), failures, verbose)
        _check(nm("interface flux"), dense_interface_flux(hp, u),
               forms.interface_flux_vector(hp, u), failures, verbose)

        f_s = lambda x, y, t: np.sin(x) * (y + 2.0) + t
        _check(nm("load scalar"), DenseOracle(hp).load(f_s, 0.3),
               forms.load_vector(f_s, hp, 0.3), failures, verbose)
        f_v = lambda x, y, t: (x * y + t, np.cos(y))
        _check(nm("load vector"), DenseOracle(vf).load(f_v, 0.7),
               forms.load_vector(f_v, vf, 0.7), failures, verbose)

        phi = Field(yw, rng.standard_normal(yw.total_dofs))
        mu = Field(yw, rng.standard_normal(yw.total_dofs))
        _check(nm("phase coupling fluid"), DenseOracle(vf).phase_coupling(phi, mu),
               forms.phase_coupling_vector(phi, mu, vf), failures, verbose)
        _check(nm("phase coupling porous"), DenseOracle(vp).phase_coupling(phi, mu),
               forms.phase_coupling_vector(phi, mu, vp), failures, verbose)
    return failures


def run_forcing_checks(verbose=False, tol=1e-6):
    """Finite-difference cross-check of the manufactured source terms."""
    from . import mms

    failures = []
    rng = np.random.default_rng(99)
    x = rng.uniform(0.08, 0.92, 24)
    yf = rng.uniform(0.08, 0.92, 24)
    yp = rng.uniform(-0.92, -0.08, 24)
    h = 1e-4

    def d_dt(f, x, y, t):
        return (f(x, y, t - 2 * h) - 8 * f(x, y, t - h)
                + 8 * f(x, y, t + h) - f(x, y, t + 2 * h)) / (12 * h)

    def lap(f, x, y, t):
        def dxx(g, x, y):
            return (-g(x - 2 * h, y, t) + 16 * g(x - h, y, t) - 30 * g(x, y, t)
                    + 16 * g(x + h, y, t) - g(x + 2 * h, y, t)) / (12 * h * h)
        return dxx(f, x, y) + dxx(lambda a, b, tt: f(b, a, tt), y, x)

    def grad(f, x, y, t):
        gx = (f(x - 2 * h, y, t) - 8 * f(x - h, y, t)
              + 8 * f(x + h, y, t) - f(x + 2 * h, y, t)) / (12 * h)
        gy = (f(x, y - 2 * h, t) - 8 * f(x, y - h, t)
              + 8 * f(x, y + h, t) - f(x, y + 2 * h, t)) / (12 * h)
        return gx, gy

    for case_id in ("ex1", "ex2"):
        case = mms.manufactured_case(case_id)
        t = 0.41
        uu = lambda x, y, tt: np.asarray(case.exact_u(x, y, tt))
        pp = lambda x, y, tt: np.asarray(case.exact_p(x, y, tt))
        ph = lambda x, y, tt: np.asarray(case.exact_phi(x, y, tt))
        px, py = grad(pp, x, yf, t)
        u = uu(x, yf, t)
        u1x, u1y = grad(lambda a, b, tt: uu(a, b, tt)[0], x, yf, t)
        u2x, u2y = grad(lambda a, b, tt: uu(a, b, tt)[1], x, yf, t)
        conv = np.array([u[0] * u1x + u[1] * u1y, u[0] * u2x + u[1] * u2y])
        fd = d_dt(uu, x, yf, t) - case.nu * lap(uu, x, yf, t) \
            + np.array([px, py]) + conv
        err = np.abs(fd - np.asarray(case.forcing_fluid(x, yf, t))).max()
        ok = err <= tol
        if verbose:
            print(f"{'PASS' if ok else 'FAIL'}  forcing f_f {case_id:8s} "
                  f"FD mismatch {err:.2e}")
        if not ok:
            failures.append((f"forcing f_f {case_id}", err))

        fd_p = case.s0 * d_dt(ph, x, yp, t) - case.k * lap(ph, x, yp, t)
        err = np.abs(fd_p - np.asarray(case.forcing_porous(x, yp, t))).max()
        ok = err <= tol * max(1.0, np.abs(fd_p).max())
        if verbose:
            print(f"{'PASS' if ok else 'FAIL'}  forcing f_p {case_id:8s} "
                  f"FD mismatch {err:.2e}")
        if not ok:
            failures.append((f"forcing f_p {case_id}", err))
    return failures


def run_all(verbose=False):
    failures = run_assembly_checks(verbose=verbose)
    failures += run_forcing_checks(verbose=verbose)
    if verbose:
        print(f"{len(failures)} failing check(s)")
    return failures
