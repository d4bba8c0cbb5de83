"""Manufactured solutions: exact fields, derived forcing, errors and rates.

Two time-periodic cases on the stacked unit squares (fluid [0,1]^2 above
porous [0,1]x[-1,0]).  Forcing terms are derived symbolically from the strong
equations, so the closed forms and their derivatives stay consistent by
construction; tests cross-check them against high-order finite differences.

Case "ex2" violates the tangential slip condition on the interface by a small
analytic residual; the harness compensates by a matching interface traction on
the momentum right-hand side so the exact solution satisfies the discrete weak
form, and the raw residual is reported by the self-test.
"""

import numpy as np
import sympy as sp

from . import forms, nsd
from .elements import interpolate, quadrature_rule
from .mesh import Geometry, build_two_domain_mesh


def _lamb(expr, syms):
    return sp.lambdify(syms, expr, "numpy")


class ManufacturedCase:
    """Closed-form exact solution plus symbolically derived data."""

    def __init__(self, case_id, u_expr, p_expr, phi_expr, nu, g, s0, k, alpha):
        self.id = case_id
        self.nu = nu
        self.g = g
        self.s0 = s0
        self.k = k
        self.alpha = alpha
        x, y, t = sp.symbols("x y t")
        u1, u2 = u_expr
        pe = p_expr
        ph = phi_expr

        f1 = sp.diff(u1, t) - nu * (sp.diff(u1, x, 2) + sp.diff(u1, y, 2)) \
            + sp.diff(pe, x) + u1 * sp.diff(u1, x) + u2 * sp.diff(u1, y)
        f2 = sp.diff(u2, t) - nu * (sp.diff(u2, x, 2) + sp.diff(u2, y, 2)) \
            + sp.diff(pe, y) + u1 * sp.diff(u2, x) + u2 * sp.diff(u2, y)
        fp = s0 * sp.diff(ph, t) - k * (sp.diff(ph, x, 2) + sp.diff(ph, y, 2))

        # interface residuals on y = 0 with n = (0, -1), tau = (1, 0)
        trk = 2 * k
        bjs_c = alpha * sp.sqrt(nu * g / trk)
        r_mass = (-u2 - k * sp.diff(ph, y)).subs(y, 0)
        r_norm = (pe - nu * sp.diff(u2, y) * 1  # n.(grad u . n) = du2/dy
                  + sp.Rational(1, 2) * (u1 ** 2 + u2 ** 2) - g * ph).subs(y, 0)
        # careful: n.(grad u.n) = sum_ij n_i d_j u_i n_j = d_y u2
        r_slip = (nu * sp.diff(u1, y) - bjs_c * u1).subs(y, 0)

        syms = (x, y, t)
        self.u = _lamb([u1, u2], syms)
        self.p = _lamb(pe, syms)
        self.p_emac = _lamb(pe - sp.Rational(1, 2) * (u1 ** 2 + u2 ** 2), syms)
        self.phi = _lamb(ph, syms)
        self.f_f = _lamb([f1, f2], syms)
        self.f_p = _lamb(fp, syms)
        self.div_u = _lamb(sp.diff(u1, x) + sp.diff(u2, y), syms)
        sxy = (x, t)
        self.mass_residual = _lamb(r_mass, sxy)
        self.normal_residual = _lamb(r_norm, sxy)
        self.slip_residual = _lamb(r_slip, sxy)

    # wrappers in the (x, y, t) calling convention of the assembly routines

    def exact_u(self, x, y, t):
        u1, u2 = self.u(x, y, t)
        return (np.broadcast_to(np.asarray(u1, float), np.shape(x)),
                np.broadcast_to(np.asarray(u2, float), np.shape(x)))

    def exact_phi(self, x, y, t):
        return np.broadcast_to(np.asarray(self.phi(x, y, t), float), np.shape(x))

    def exact_p(self, x, y, t, convection="standard"):
        fn = self.p_emac if convection == "emac" else self.p
        return np.broadcast_to(np.asarray(fn(x, y, t), float), np.shape(x))

    def forcing_fluid(self, x, y, t):
        f1, f2 = self.f_f(x, y, t)
        return (np.broadcast_to(np.asarray(f1, float), np.shape(x)),
                np.broadcast_to(np.asarray(f2, float), np.shape(x)))

    def forcing_porous(self, x, y, t):
        return np.broadcast_to(np.asarray(self.f_p(x, y, t), float), np.shape(x))

    def interface_traction(self, x, y, t):
        """Tangential slip defect of the exact solution, applied as traction."""
        return np.broadcast_to(np.asarray(self.slip_residual(x, t), float),
                               np.shape(x))

    def interface_residuals(self, x, t):
        """Raw residuals of the three interface conditions along y = 0."""
        return (np.broadcast_to(np.asarray(self.mass_residual(x, t), float), np.shape(x)),
                np.broadcast_to(np.asarray(self.normal_residual(x, t), float), np.shape(x)),
                np.broadcast_to(np.asarray(self.slip_residual(x, t), float), np.shape(x)))

    def geometry(self):
        return Geometry((0.0, 1.0, 0.0, 1.0), (0.0, 1.0, -1.0, 0.0))


_CASES = {}


def manufactured_case(case_id):
    """Exact solutions of the two convergence benchmarks (built once)."""
    if case_id in _CASES:
        return _CASES[case_id]
    x, y, t = sp.symbols("x y t")
    nu, g, s0, k, alpha = 0.001, 1.0, 1.0, 1.0, 1.0
    if case_id == "ex1":
        c = 64 * sp.pi ** 2
        u = (x ** 2 * y ** 2 * sp.cos(t),
             -sp.Rational(2, 3) * x * y ** 3 * sp.cos(t))
        p = c * x ** 2 * (x - 1) ** 2 * y ** 2 * (y - 1) ** 2 * sp.cos(t)
        phi = c * x ** 2 * (x - 1) ** 2 * (y + 1) ** 2 * y ** 2 * sp.cos(t)
    elif case_id == "ex2":
        l = 1 / (20 * sp.pi ** 2)
        u = (l * sp.sin(sp.pi * x) ** 2 * sp.sin(2 * sp.pi * y) * sp.cos(t),
             -l * sp.sin(2 * sp.pi * x) * sp.sin(sp.pi * y) ** 2 * sp.cos(t))
        p = sp.sin(sp.pi * y) * sp.cos(sp.pi * x) * sp.cos(t)
        phi = sp.sin(sp.pi * x) * sp.sin(sp.pi * y) ** 2 * sp.cos(t)
    else:
        raise ValueError(f"unknown manufactured case {case_id!r}")
    case = ManufacturedCase(case_id, u, p, phi, nu, g, s0, k, alpha)
    _CASES[case_id] = case
    return case


def l2_error(field, exact, t, degree=7):
    """L2 norm of (field - exact) over the field's domain."""
    dm = field.dofmap
    qr = quadrature_rule("triangle", degree)
    vals = forms.eval_field(field, dm.tri_ids, qr.points)
    verts, jac, jinv, det = forms._tri_geometry(dm.mesh, dm.tri_ids)
    xq = np.einsum("qi,tid->tqd", qr.points, dm.mesh.nodes[dm.mesh.triangles[dm.tri_ids]])
    detw = det[:, None] * qr.weights[None, :]
    if dm.components == 1:
        ex = np.broadcast_to(np.asarray(exact(xq[:, :, 0], xq[:, :, 1], t), float),
                             detw.shape)
        err2 = (vals - ex) ** 2
    else:
        ex, ey = exact(xq[:, :, 0], xq[:, :, 1], t)
        ex = np.broadcast_to(np.asarray(ex, float), detw.shape)
        ey = np.broadcast_to(np.asarray(ey, float), detw.shape)
        err2 = (vals[:, :, 0] - ex) ** 2 + (vals[:, :, 1] - ey) ** 2
    return float(np.sqrt(np.einsum("tq,tq->", detw, err2)))


def scheme_config(case, scheme, convection, dt, t_end=0.5):
    co = forms.FormCoefficients(nu=case.nu, g=case.g, s0=case.s0,
                                K=case.k, alpha=case.alpha)
    return nsd.SchemeConfig(
        co, dt=dt, t_end=t_end, scheme=scheme, convection=convection,
        forcing_fluid=case.forcing_fluid, forcing_porous=case.forcing_porous,
        dirichlet_fluid=case.exact_u, dirichlet_porous=case.exact_phi,
        interface_traction=case.interface_traction)


def run_case(case, scheme, convection, h, dt, t_end=0.5):
    """March the scheme against the exact solution; return final errors."""
    from . import sparse
    mesh = build_two_domain_mesh(case.geometry(), h)
    config = scheme_config(case, scheme, convection, dt, t_end)
    fac0 = sparse.factorization_count()
    ops = nsd.precompute_systems(config, mesh)
    u0 = ops.interpolate_velocity(lambda x, y: case.exact_u(x, y, 0.0))
    phi0 = ops.interpolate_head(lambda x, y: case.exact_phi(x, y, 0.0))
    p0 = interpolate(ops.pressure,
                     lambda x, y: case.exact_p(x, y, 0.0, convection))
    n_steps = int(round(t_end / dt))
    records, state, diag = nsd.run_nsd(config, mesh, u0, phi0, p0=p0,
                                       ops=ops, n_steps=n_steps)
    t_final = n_steps * dt
    err_u = l2_error(state.u, case.exact_u, t_final)
    err_phi = l2_error(state.phi, case.exact_phi, t_final)
    err_p = l2_error(state.p, lambda x, y, t: case.exact_p(x, y, t, convection),
                     t_final)
    return {"h": h, "dt": dt, "err_u": err_u, "err_phi": err_phi,
            "err_p": err_p, "diag": diag,
            "factorizations": sparse.factorization_count() - fac0}


def fit_rate(dts, errors):
    """Least-squares slope of log(error) against log(dt)."""
    lx = np.log(np.asarray(dts, float))
    ly = np.log(np.asarray(errors, float))
    slope = np.polyfit(lx, ly, 1)[0]
    return float(slope)


DT_RULES = {
    ("ex1", 1): lambda h: h * h,
    ("ex2", 1): lambda h: h * h,
    ("ex1", 2): lambda h: h / 8.0,
    ("ex2", 2): lambda h: h / 4.0,
}


def convergence_study(case_id, scheme, convection="standard", h_list=None,
                      dt_rule=None, t_end=0.5):
    """Error table over a mesh sequence plus fitted temporal rates."""
    case = manufactured_case(case_id)
    if h_list is None:
        h_list = [1 / 16, 1 / 20, 1 / 24, 1 / 28, 1 / 32]
    if dt_rule is None:
        dt_rule = DT_RULES[(case_id, scheme)]
    rows = []
    for h in h_list:
        dt = dt_rule(h)
        try:
            rows.append(run_case(case, scheme, convection, h, dt, t_end))
        except Exception as exc:   # record the failure, keep the study going
            rows.append({"h": h, "dt": dt, "err_u": np.nan, "err_phi": np.nan,
                         "err_p": np.nan, "error": str(exc)})
    ok = [r for r in rows if np.isfinite(r["err_u"])]
    rates = {}
    if len(ok) >= 2:
        dts = [r["dt"] for r in ok]
        rates["u"] = fit_rate(dts, [r["err_u"] for r in ok])
        rates["phi"] = fit_rate(dts, [r["err_phi"] for r in ok])
        rates["p"] = fit_rate(dts, [r["err_p"] for r in ok])
    return rows, rates


def write_convergence_csv(rows, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("h,dt,err_u,err_phi,err_p\n")
        for r in rows:
            fh.write(f"{r['h']:.10g},{r['dt']:.10g},{r['err_u']:.12e},"
                     f"{r['err_phi']:.12e},{r['err_p']:.12e}\n")
