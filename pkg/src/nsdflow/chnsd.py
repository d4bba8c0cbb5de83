"""Sequential phase-field / Darcy / free-flow stepping for the two-phase model.

Each step solves, in order: the coupled (phi, mu) phase system on the whole
domain, the porous velocity/head saddle system, and the fluid saddle system;
then a scalar relaxation factor rescales the two predicted velocities so the
split energy E = E0(phi) + xi * E1(u) obeys the discrete balance equation.

The phase operator depends on the mobility M(phi^n) and is re-factorized every
step; the Darcy and free-flow operators are constant and factorized once.
"""

import numpy as np

from . import forms, sparse
from .elements import Field, build_dof_map, interpolate
from .mesh import GAMMA_F, GAMMA_P

DEFAULT_MOBILITY = None  # set per configuration


def double_well(phi):
    return 0.25 * (phi ** 2 - 1.0) ** 2


def double_well_prime(phi):
    return phi ** 3 - phi


class ChnsdConfig:
    """Parameters of the two-phase solver; coefficients must define
    nu_f, nu_p, chi, lam, eps, alpha, K and a positive mobility function."""

    def __init__(self, coefficients, dt, t_end, convection="emac",
                 buoyancy=None, solver="lu"):
        co = coefficients
        for name in ("nu_f", "nu_p", "chi", "lam", "eps"):
            if getattr(co, name) is None:
                raise ValueError(f"coefficient {name} is required")
        if co.mobility is None:
            raise ValueError("a mobility function M(phi) is required")
        if dt <= 0 or t_end < dt:
            raise ValueError("invalid time stepping parameters")
        self.coefficients = co
        self.dt = dt
        self.t_end = t_end
        self.convection = convection
        self.buoyancy = None if buoyancy is None else np.asarray(buoyancy, float)
        self.solver = solver


class ChnsdState:
    def __init__(self, t, phi, mu, u_f, u_f_tilde, p_f, u_p, u_p_tilde, p_p,
                 energy, e0, xi):
        self.t = t
        self.phi = phi
        self.mu = mu
        self.u_f = u_f
        self.u_f_tilde = u_f_tilde
        self.p_f = p_f
        self.u_p = u_p
        self.u_p_tilde = u_p_tilde
        self.p_p = p_p
        self.energy = energy
        self.e0 = e0
        self.xi = xi


class ChnsdOperators:
    def __init__(self, config, mesh):
        co = config.coefficients
        dt = config.dt
        self.mesh = mesh
        self.phase = build_dof_map(mesh, "P1", 1, "whole")
        self.vel_f = build_dof_map(mesh, "P2", 2, "fluid")
        self.pres_f = build_dof_map(mesh, "P1", 1, "fluid")
        self.vel_p = build_dof_map(mesh, "P2", 2, "porous")
        self.head_p = build_dof_map(mesh, "P1", 1, "porous")

        self.mass_y = forms.mass_matrix(self.phase)
        self.stiff_y = forms.stiffness_matrix(self.phase)
        self.ones_y = forms.load_vector(lambda x, y, t: np.ones_like(x),
                                        self.phase)
        self.domain_area = float(self.ones_y.sum())

        # free flow
        self.mass_uf = forms.mass_matrix(self.vel_f)
        self.stiff_uf = forms.stiffness_matrix(self.vel_f)
        self.bjs = forms.bjs_matrix(self.vel_f, co, model="chnsd")
        self.div_f = forms.divergence_matrix(self.vel_f, self.pres_f)
        self.ip = forms.cgamma_matrix(self.vel_f, self.head_p, 1.0)
        nuf_dofs = self.vel_f.total_dofs
        npf_dofs = self.pres_f.total_dofs
        self.n_fluid = nuf_dofs + npf_dofs
        amom = (self.mass_uf / dt + co.nu_f * self.stiff_uf + self.bjs).tocoo()
        bt = self.div_f.T.tocoo()
        bb = self.div_f.tocoo()
        rows = np.concatenate([amom.row, bt.row, bb.row + nuf_dofs])
        cols = np.concatenate([amom.col, bt.col + nuf_dofs, bb.col])
        vals = np.concatenate([amom.data, -bt.data, bb.data])
        saddle = sparse.assemble_from_triplets(self.n_fluid, self.n_fluid,
                                               rows, cols, vals)
        self.fluid_dirichlet = self.vel_f.boundary_dofs(GAMMA_F)
        self.fluid_system = sparse.ConstrainedSystem(
            saddle, self.fluid_dirichlet, self.n_fluid, method=config.solver)

        # porous flow: unknowns (u_p, p_p, mean multiplier)
        self.mass_up = forms.mass_matrix(self.vel_p)
        kinv = co.k_inverse(len(self.vel_p.tri_ids))
        self.kinv_mass = forms.tensor_mass_matrix(self.vel_p, kinv)
        self.grad_p = forms.gradient_matrix(self.vel_p, self.head_p)
        self.mean_p = forms.load_vector(lambda x, y, t: np.ones_like(x),
                                        self.head_p)
        nup, nhp = self.vel_p.total_dofs, self.head_p.total_dofs
        self.n_porous = nup + nhp + 1
        au = (self.mass_up / (co.chi * dt) + self.kinv_mass).tocoo()
        dg = self.grad_p.tocoo()
        rows = np.concatenate([au.row, dg.row, dg.col + nup,
                               np.arange(nhp) + nup,
                               np.full(nhp, nup + nhp)])
        cols = np.concatenate([au.col, dg.col + nup, dg.row,
                               np.full(nhp, nup + nhp),
                               np.arange(nhp) + nup])
        vals = np.concatenate([au.data, dg.data, -dg.data,
                               self.mean_p, self.mean_p])
        darcy = sparse.assemble_from_triplets(self.n_porous, self.n_porous,
                                              rows, cols, vals)
        self.normal_dirichlet = self._normal_component_dofs()
        self.darcy_system = sparse.ConstrainedSystem(
            darcy, self.normal_dirichlet, self.n_porous, method=config.solver)

    def _normal_component_dofs(self):
        """Dofs of u.n on the outer porous boundary (axis-aligned edges)."""
        dm = self.vel_p
        bnd = dm.mesh.boundary[GAMMA_P]
        dofs = set()
        for i, (a, b) in enumerate(bnd["nodes"]):
            n = bnd["normal"][i]
            comp = 0 if abs(n[0]) > abs(n[1]) else 1
            ents = [dm.vertex_entity[a], dm.vertex_entity[b],
                    dm.edge_entity[(min(a, b), max(a, b))]]
            for e in ents:
                dofs.add(int(e) * 2 + comp)
        return np.array(sorted(dofs), dtype=np.int64)


def precompute_systems(config, mesh):
    return ChnsdOperators(config, mesh)


def chnsd_energy(ops, config, phi, u_f_coeff, u_p_coeff):
    """(E0, E1, E): free energy of the phase plus kinetic parts."""
    co = config.coefficients
    pq = forms.field_values_qp(ops.phase, phi)
    e0 = 0.5 * co.lam * co.eps * phi.coefficients @ (ops.stiff_y @ phi.coefficients) \
        + (co.lam / co.eps) * forms.integrate_qp(ops.phase, double_well(pq))
    e1 = 0.5 * u_f_coeff @ (ops.mass_uf @ u_f_coeff) \
        + 0.5 / co.chi * u_p_coeff @ (ops.mass_up @ u_p_coeff)
    return float(e0), float(e1), float(e0 + e1)


def phase_mass(ops, phi):
    return float(ops.ones_y @ phi.coefficients)


def isoperimetric_ratio(ops, phi):
    """P^2 / (4 pi A) of the phi > 0 region; 1 for a circle.

    Area from the sharp-interface indicator (1 + phi)/2; perimeter from the
    tanh-profile identity  int |grad phi| ~= 2 P.
    """
    vals, grads = forms.field_values_qp(ops.phase, phi, need_grad=True)
    area = forms.integrate_qp(ops.phase, 0.5 * (1.0 + vals))
    perim = 0.5 * forms.integrate_qp(ops.phase,
                                     np.sqrt((grads ** 2).sum(axis=-1)))
    return perim ** 2 / (4.0 * np.pi * area)


def phase_center_of_mass(ops, phi):
    """Vertical centroid of the phi > 0 region."""
    vals = forms.field_values_qp(ops.phase, phi)
    xq, detw = forms.quadrature_points(ops.phase)
    ind = 0.5 * (1.0 + vals)
    num = float(np.einsum("tq,tq,tq->", detw, ind, xq[:, :, 1]))
    den = forms.integrate_qp(ops.phase, ind)
    return num / den


def ch_step(state, ops, config):
    """Solve the coupled linear (phi, mu) system with explicit transport and
    explicit double-well slope, implicit mobility diffusion."""
    co = config.coefficients
    dt = config.dt
    ny = ops.phase.total_dofs
    phin = forms.field_values_qp(ops.phase, state.phi)
    mob = co.mobility(phin)
    if np.any(mob <= 0):
        raise ValueError("mobility must stay positive")
    k_mob = forms.weighted_stiffness_matrix(ops.phase, mob)

    m = ops.mass_y.tocoo()
    km = k_mob.tocoo()
    ky = ops.stiff_y.tocoo()
    rows = np.concatenate([m.row, km.row, ky.row + ny, m.row + ny])
    cols = np.concatenate([m.col, km.col + ny, ky.col, m.col + ny])
    vals = np.concatenate([m.data / dt, km.data,
                           -co.lam * co.eps * ky.data, m.data])
    a = sparse.assemble_from_triplets(2 * ny, 2 * ny, rows, cols, vals)

    transport = forms.transport_vector(
        state.phi, {"fluid": state.u_f, "porous": state.u_p}, ops.phase)
    gp = forms.function_load_vector(ops.phase, double_well_prime(phin))
    rhs = np.concatenate([ops.mass_y @ (state.phi.coefficients / dt) + transport,
                          (co.lam / co.eps) * gp])
    sol = sparse.lu_factorize(a).solve(rhs)
    return Field(ops.phase, sol[:ny]), Field(ops.phase, sol[ny:])


def darcy_step(state, phi_next, mu_next, ops, config):
    """Porous velocity/head solve with explicit interface flux from the fluid."""
    co = config.coefficients
    dt = config.dt
    nup, nhp = ops.vel_p.total_dofs, ops.head_p.total_dofs
    rhs_u = ops.mass_up @ (state.u_p.coefficients / (co.chi * dt)) \
        - forms.phase_coupling_vector(phi_next, mu_next, ops.vel_p)
    work_vec_p = None
    if config.buoyancy is not None:
        pbar = phase_mass(ops, phi_next) / ops.domain_area
        work_vec_p = forms.buoyancy_vector(ops.vel_p, phi_next,
                                           config.buoyancy, pbar)
        rhs_u = rhs_u + work_vec_p
    rhs_p = forms.interface_flux_vector(ops.head_p, state.u_f)
    rhs = np.concatenate([rhs_u, rhs_p, [0.0]])
    sol = ops.darcy_system.solve(rhs)
    u_p_tilde = Field(ops.vel_p, sol[:nup])
    p_p = Field(ops.head_p, sol[nup:nup + nhp])
    return u_p_tilde, p_p, work_vec_p


def ns_step(state, phi_next, mu_next, p_p_next, ops, config):
    """Free-flow solve with explicit convection and interface head load."""
    co = config.coefficients
    dt = config.dt
    if config.convection == "emac":
        conv = forms.convection_vector_b(state.u_f, ops.vel_f)
    else:
        conv = forms.convection_vector_a(state.u_f, ops.vel_f)
    rhs_u = ops.mass_uf @ (state.u_f.coefficients / dt) - conv \
        - ops.ip @ p_p_next.coefficients \
        - forms.phase_coupling_vector(phi_next, mu_next, ops.vel_f)
    work_vec_f = None
    if config.buoyancy is not None:
        pbar = phase_mass(ops, phi_next) / ops.domain_area
        work_vec_f = forms.buoyancy_vector(ops.vel_f, phi_next,
                                           config.buoyancy, pbar)
        rhs_u = rhs_u + work_vec_f
    rhs = np.concatenate([rhs_u, np.zeros(ops.pres_f.total_dofs)])
    sol = ops.fluid_system.solve(rhs)
    nuf = ops.vel_f.total_dofs
    return Field(ops.vel_f, sol[:nuf]), Field(ops.pres_f, sol[nuf:]), work_vec_f


def dissipation3(ops, config, u_f_tilde, u_p_tilde, phi_next, mu_next):
    """nu_f ||grad u_f||^2 + slip term + ||K^{-1/2} u_p||^2 + (M |grad mu|^2)."""
    co = config.coefficients
    uf, up = u_f_tilde.coefficients, u_p_tilde.coefficients
    val = co.nu_f * uf @ (ops.stiff_uf @ uf) + uf @ (ops.bjs @ uf) \
        + up @ (ops.kinv_mass @ up)
    pq = forms.field_values_qp(ops.phase, phi_next)
    _, gmu = forms.field_values_qp(ops.phase, mu_next, need_grad=True)
    val += forms.integrate_qp(ops.phase,
                              co.mobility(pq) * (gmu ** 2).sum(axis=-1))
    return float(val)


def correct3(energy_prev, e0_next, e1_tilde, i_value, dt, work=0.0):
    """Relaxation factor for the split energy; clamped at zero if the phase
    update raised the free energy above the previous total (flagged)."""
    denom = e1_tilde + dt * i_value
    numer = energy_prev - e0_next + dt * work
    clamped = False
    if denom <= 0.0:
        if abs(numer) == 0.0:
            return 1.0, e0_next, False
        raise sparse.SolverError("relaxation equation degenerate")
    xi = numer / denom
    if xi < 0.0:
        xi = 0.0
        clamped = True
    return xi, e0_next + xi * e1_tilde, clamped


def initial_state(ops, config, phi0, u_f0=None, u_p0=None):
    phi = phi0 if isinstance(phi0, Field) else interpolate(ops.phase, phi0)
    mu = Field(ops.phase)
    u_f = Field(ops.vel_f) if u_f0 is None else (
        u_f0 if isinstance(u_f0, Field) else interpolate(ops.vel_f, u_f0))
    u_p = Field(ops.vel_p) if u_p0 is None else (
        u_p0 if isinstance(u_p0, Field) else interpolate(ops.vel_p, u_p0))
    e0, e1, e = chnsd_energy(ops, config, phi, u_f.coefficients, u_p.coefficients)
    return ChnsdState(0.0, phi, mu, u_f, u_f.copy(), Field(ops.pres_f),
                      u_p, u_p.copy(), Field(ops.head_p), e, e0, 1.0)


def step(state, ops, config):
    dt = config.dt
    phi_next, mu_next = ch_step(state, ops, config)
    u_p_tilde, p_p_next, bvec_p = darcy_step(state, phi_next, mu_next, ops, config)
    u_f_tilde, p_f_next, bvec_f = ns_step(state, phi_next, mu_next, p_p_next,
                                          ops, config)

    co = config.coefficients
    e0_next, e1_tilde, _ = chnsd_energy(ops, config, phi_next,
                                        u_f_tilde.coefficients,
                                        u_p_tilde.coefficients)
    i3 = dissipation3(ops, config, u_f_tilde, u_p_tilde, phi_next, mu_next)
    work = 0.0
    if bvec_f is not None:
        work += float(bvec_f @ u_f_tilde.coefficients)
    if bvec_p is not None:
        work += float(bvec_p @ u_p_tilde.coefficients)
    xi, e_next, clamped = correct3(state.energy, e0_next, e1_tilde, i3, dt, work)
    root = np.sqrt(xi)
    u_f_next = Field(ops.vel_f, root * u_f_tilde.coefficients)
    u_p_next = Field(ops.vel_p, root * u_p_tilde.coefficients)

    identity_residual = (e_next - state.energy + dt * (xi * i3 - work)
                         if not clamped else np.nan)
    new_state = ChnsdState(state.t + dt, phi_next, mu_next, u_f_next,
                           u_f_tilde, p_f_next, u_p_next, u_p_tilde, p_p_next,
                           e_next, e0_next, xi)
    extras = {"identity_residual": identity_residual, "clamped": clamped,
              "work": work, "i3": i3,
              "div_residual": float(np.linalg.norm(ops.div_f @ u_f_tilde.coefficients))}
    return new_state, extras


class ChnsdDiagnostics:
    def __init__(self, e0, mass0):
        self.e0 = e0
        self.mass0 = mass0
        self.clamped_steps = 0
        self.max_identity_residual = 0.0
        self.max_mass_drift = 0.0
        self.max_energy_increase = 0.0
        self.factorizations = 0


def run_chnsd(config, mesh, phi0, u_f0=None, u_p0=None, ops=None,
              n_steps=None, on_record=None):
    """March the two-phase model, asserting mass conservation every step and
    the energy balance on unclamped steps (monotone decay unless buoyant)."""
    from .nsd import TraceRecord

    fac0 = sparse.factorization_count()
    if ops is None:
        ops = precompute_systems(config, mesh)
    state = initial_state(ops, config, phi0, u_f0, u_p0)
    if n_steps is None:
        n_steps = int(round(config.t_end / config.dt))

    diag = ChnsdDiagnostics(state.energy, phase_mass(ops, state.phi))
    tol_scale = max(1.0, abs(diag.e0))
    mass_tol = 1e-10 * max(1.0, abs(diag.mass0) + ops.domain_area)
    records = []
    for n in range(n_steps):
        e_prev = state.energy
        state, extras = step(state, ops, config)
        mass = phase_mass(ops, state.phi)
        drift = abs(mass - diag.mass0)
        diag.max_mass_drift = max(diag.max_mass_drift, drift)
        if drift > (n + 1) * mass_tol:
            raise AssertionError(
                f"phase mass drift {drift:.3e} at step {n + 1}")
        flags = ""
        if extras["clamped"]:
            diag.clamped_steps += 1
            flags = "clamped"
        else:
            res = abs(extras["identity_residual"])
            diag.max_identity_residual = max(diag.max_identity_residual, res)
            if res > 1e-10 * tol_scale:
                raise AssertionError(
                    f"energy identity violated at step {n + 1}: {res:.3e}")
            if config.buoyancy is None:
                inc = state.energy - e_prev
                diag.max_energy_increase = max(diag.max_energy_increase, inc)
                if inc > 1e-10 * tol_scale:
                    raise AssertionError(
                        f"energy increased at step {n + 1} by {inc:.3e}")
        if state.xi < 0:
            raise AssertionError("negative relaxation factor")
        rec = TraceRecord(n + 1, state.t, state.energy, state.xi,
                          extras["i3"], extras["div_residual"], mass, flags)
        records.append(rec)
        if on_record is not None:
            on_record(state, rec)
    diag.factorizations = sparse.factorization_count() - fac0
    return records, state, diag
