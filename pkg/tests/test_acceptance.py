"""Acceptance suite: every criterion runs at its stated tolerance and prints
one PASS/FAIL line.  Run with `pytest tests/test_acceptance.py -v -s`.

The temporal-order criteria assert two-sided rate windows for both variables;
for the velocity the measured rates land above the windows (the exact
solutions are strongly pressure-dominated and the vs-exact L2 velocity error
superconverges at these resolutions; the reference-isolated probes in
test_mms confirm the clean temporal order).  Those assertions are kept
literal and fail honestly with the measured numbers.
"""

import numpy as np
import pytest

from nsdflow import chnsd, config as cfgm, forms, mms, nsd, oracles, sparse
from nsdflow.elements import Field, build_dof_map, interpolate
from nsdflow.mesh import Geometry, build_two_domain_mesh

UNIT_STACK = Geometry((0, 1, 0, 1), (0, 1, -1, 0))


def report(name, ok, detail):
    print(f"\nACCEPTANCE {'PASS' if ok else 'FAIL'} - {name}: {detail}")
    assert ok, f"{name}: {detail}"


# ---------------------------------------------------------------------------
# shared expensive runs
# ---------------------------------------------------------------------------

@pytest.fixture(scope="session")
def study_s1_ex1():
    return mms.convergence_study("ex1", 1)


@pytest.fixture(scope="session")
def study_s2_ex1():
    return mms.convergence_study("ex1", 2)


@pytest.fixture(scope="session")
def study_s2_ex2():
    return mms.convergence_study("ex2", 2)


@pytest.fixture(scope="session")
def dissipation_runs():
    mesh = build_two_domain_mesh(UNIT_STACK, 1 / 16)
    co = forms.FormCoefficients(nu=1.0, g=1.0, s0=1.0, K=1.0, alpha=1.0)
    out = []
    for dt in (0.1, 0.01, 0.001):
        cfg = nsd.SchemeConfig(co, dt=dt, t_end=100 * dt)
        sparse.reset_factorization_count()
        ops = nsd.precompute_systems(cfg, mesh)
        rng = np.random.default_rng(2024)
        u0 = Field(ops.velocity, rng.standard_normal(ops.velocity.total_dofs))
        u0.coefficients[ops.fluid_dirichlet] = 0.0
        phi0 = Field(ops.head, rng.standard_normal(ops.head.total_dofs))
        phi0.coefficients[ops.head_dirichlet] = 0.0
        records, state, diag = nsd.run_nsd(cfg, mesh, u0, phi0, ops=ops,
                                           n_steps=100)
        out.append((dt, records, diag, sparse.factorization_count()))
    return out


@pytest.fixture(scope="session")
def filtration_runs():
    mesh = build_two_domain_mesh(cfgm.filtration_geometry(), 1 / 40)
    out = {}
    for letter in "abcdefg":
        rng = np.random.default_rng(0)
        K = cfgm.filtration_conductivity(mesh, letter, rng)
        co = forms.FormCoefficients(nu=1.0, g=1.0, s0=1.0, K=K, alpha=1.0)
        cfg = nsd.SchemeConfig(co, dt=0.005, t_end=0.5, scheme=1,
                               convection="emac")
        ops = nsd.precompute_systems(cfg, mesh)
        u0 = nsd.project_initial_velocity(
            ops, cfg,
            interpolate(ops.velocity, cfgm.filtration_initial_velocity))
        records, state, diag = nsd.run_nsd(cfg, mesh, u0, Field(ops.head),
                                           ops=ops)
        out[letter] = (records, diag)
    return out


def chnsd_coefficients(eps, nu_p, K):
    return forms.FormCoefficients(
        nu=1.0, g=1.0, s0=1.0, K=K, alpha=0.01, nu_f=0.1, nu_p=nu_p,
        chi=1.0, lam=0.1, eps=eps, mobility=cfgm.default_mobility(eps))


@pytest.fixture(scope="session")
def droplet_run():
    # droplet relaxation at desk scale: published parameters except the
    # interface width, widened to stay resolvable/stable at h = 1/32
    eps = 0.03
    mesh = build_two_domain_mesh(cfgm.two_phase_geometry(), 1 / 32)
    cfg = chnsd.ChnsdConfig(chnsd_coefficients(eps, 1.0, 0.01 * np.eye(2)),
                            dt=0.005, t_end=1.0)
    ops = chnsd.precompute_systems(cfg, mesh)
    ratios = []

    def watch(state, rec):
        if rec.step % 40 == 0:
            ratios.append(chnsd.isoperimetric_ratio(ops, state.phi))

    phi0 = cfgm.droplet_initial_phase(4, eps)
    r0 = chnsd.isoperimetric_ratio(
        ops, chnsd.initial_state(ops, cfg, phi0).phi)
    records, state, diag = chnsd.run_chnsd(cfg, mesh, phi0, ops=ops,
                                           on_record=watch)
    return r0, ratios, records, diag


@pytest.fixture(scope="session")
def bubble_run():
    eps = 0.03
    mesh = build_two_domain_mesh(cfgm.two_phase_geometry(), 1 / 32)
    cfg = chnsd.ChnsdConfig(chnsd_coefficients(eps, 1.0, 0.01 * np.eye(2)),
                            dt=0.005, t_end=1.0, buoyancy=(0.0, 5.0))
    ops = chnsd.precompute_systems(cfg, mesh)
    coms = []

    def watch(state, rec):
        if rec.step % 20 == 0:
            coms.append(chnsd.phase_center_of_mass(ops, state.phi))

    phi0 = cfgm.bubble_initial_phase(0.3, [(0.5, 0.5)], eps)
    com0 = chnsd.phase_center_of_mass(
        ops, chnsd.initial_state(ops, cfg, phi0).phi)
    records, state, diag = chnsd.run_chnsd(cfg, mesh, phi0, ops=ops,
                                           on_record=watch)
    return [com0] + coms, records, diag


@pytest.fixture(scope="session")
def separation_run():
    # phase-separation style, 500 steps at desk scale
    eps = 0.03
    mesh = build_two_domain_mesh(cfgm.two_phase_geometry(), 1 / 24)
    cfg = chnsd.ChnsdConfig(
        chnsd_coefficients(eps, 0.1, np.array([[0.5, 0.1], [0.1, 0.2]])),
        dt=0.002, t_end=1.0)
    sparse.reset_factorization_count()
    ops = chnsd.precompute_systems(cfg, mesh)
    rng = np.random.default_rng(11)
    records, state, diag = chnsd.run_chnsd(
        cfg, mesh, cfgm.separation_initial_phase(rng), ops=ops, n_steps=500)
    return records, diag, sparse.factorization_count()


# ---------------------------------------------------------------------------
# criteria
# ---------------------------------------------------------------------------

def test_temporal_order_scheme1(study_s1_ex1):
    rows, rates = study_s1_ex1
    detail = (f"Ex1 dt=h^2 fitted L2 rates: u={rates['u']:.2f}, "
              f"phi={rates['phi']:.2f} (window [0.8, 1.2]); "
              "reference-isolated temporal ratios confirm order 1 "
              "(see test_mms); the vs-exact u error superconverges "
              "spatially at these resolutions")
    ok = 0.8 <= rates["phi"] <= 1.2 and 0.8 <= rates["u"] <= 1.2
    report("temporal-order-scheme-1", ok, detail)


def test_temporal_order_scheme2(study_s2_ex1, study_s2_ex2):
    _, r1 = study_s2_ex1
    _, r2 = study_s2_ex2
    detail = (f"Ex1 dt=h/8: u={r1['u']:.2f}, phi={r1['phi']:.2f}; "
              f"Ex2 dt=h/4: u={r2['u']:.2f}, phi={r2['phi']:.2f} "
              "(window [1.7, 2.3]); u superconverges spatially")
    ok = all(1.7 <= r[k] <= 2.3 for r in (r1, r2) for k in ("u", "phi"))
    report("temporal-order-scheme-2", ok, detail)


def test_unconditional_dissipation(dissipation_runs):
    worst_inc = 0.0
    min_xi = np.inf
    for dt, records, diag, _ in dissipation_runs:
        E = [diag.e0] + [r.E for r in records]
        inc = max(E[i + 1] - E[i] for i in range(len(E) - 1)) / diag.e0
        worst_inc = max(worst_inc, inc)
        min_xi = min(min_xi, diag.min_xi)
    ok = worst_inc <= 1e-12 and min_xi >= 0.0
    report("unconditional-dissipation", ok,
           f"dt in {{0.1, 0.01, 0.001}}, 100 steps each: "
           f"max energy increase {worst_inc:.2e} E0 (tol 1e-12), "
           f"min xi {min_xi:.3f}")


def test_discrete_energy_identity(dissipation_runs, filtration_runs,
                                  study_s1_ex1, study_s2_ex1, study_s2_ex2):
    worst = 0.0
    for dt, records, diag, _ in dissipation_runs:
        worst = max(worst, diag.max_identity_residual / max(1.0, diag.e0))
    for letter, (records, diag) in filtration_runs.items():
        worst = max(worst, diag.max_identity_residual / max(1.0, diag.e0))
    for rows, _ in (study_s1_ex1, study_s2_ex1, study_s2_ex2):
        for r in rows:
            d = r["diag"]
            worst = max(worst, d.max_identity_residual / max(1.0, d.e0))
    ok = worst <= 1e-11
    report("discrete-energy-identity", ok,
           f"max |E'-E+dt(xi I - W)| over all scheme I/II runs: "
           f"{worst:.2e} max(1, E0) (tol 1e-11)")


def test_summed_stability_bound():
    mesh = build_two_domain_mesh(UNIT_STACK, 1 / 8)
    co = forms.FormCoefficients(nu=1.0, g=1.0, s0=1.0, K=1.0, alpha=1.0)
    cfg = nsd.SchemeConfig(co, dt=0.01, t_end=10.0)
    ops = nsd.precompute_systems(cfg, mesh)
    rng = np.random.default_rng(77)
    u0 = Field(ops.velocity, rng.standard_normal(ops.velocity.total_dofs))
    u0.coefficients[ops.fluid_dirichlet] = 0.0
    phi0 = Field(ops.head, rng.standard_normal(ops.head.total_dofs))
    phi0.coefficients[ops.head_dirichlet] = 0.0
    records, state, diag = nsd.run_nsd(cfg, mesh, u0, phi0, ops=ops,
                                       n_steps=1000)
    final = 0.5 * state.u.coefficients @ (ops.mass_u @ state.u.coefficients) \
        + 0.5 * state.phi.coefficients @ (ops.mass_phi @ state.phi.coefficients)
    total = final + cfg.dt * sum(r.xi * r.I for r in records)
    rel = abs(total - diag.e0) / diag.e0
    ok = rel <= 1e-9
    report("summed-stability-bound", ok,
           f"|E_k + dt sum xi*I - E0| = {rel:.2e} E0 after 1000 steps "
           "(tol 1e-9)")


def test_emac_identity():
    mesh = build_two_domain_mesh(UNIT_STACK, 1 / 8)
    vf = build_dof_map(mesh, "P2", 2, "fluid")
    M = forms.mass_matrix(vf)
    A = forms.stiffness_matrix(vf)
    gf = vf.boundary_dofs("gamma_f")
    rng = np.random.default_rng(42)
    worst_b = 0.0
    for _ in range(100):
        u = Field(vf, rng.standard_normal(vf.total_dofs))
        u.coefficients[gf] = 0.0
        bv = forms.convection_vector_b(u, vf)
        scale = (u.coefficients @ (M @ u.coefficients)
                 + u.coefficients @ (A @ u.coefficients)) ** 1.5
        worst_b = max(worst_b, abs(bv @ u.coefficients) / scale)
    u = interpolate(vf, lambda x, y: (x ** 2, -2 * x * y))
    av = forms.convection_vector_a(u, vf)
    scale_a = (u.coefficients @ (M @ u.coefficients)
               + u.coefficients @ (A @ u.coefficients)) ** 1.5
    rel_a = abs(av @ u.coefficients) / scale_a
    ok = worst_b <= 1e-12 and rel_a <= 1e-12
    report("emac-identity", ok,
           f"max |b(u,u,u)| = {worst_b:.2e} (100 random fields), "
           f"|a(u,u,u)| = {rel_a:.2e} for the divergence-free quadratic "
           "(tol 1e-12, H1-scaled)")


def test_assembly_oracle_equivalence():
    failures = oracles.run_assembly_checks(verbose=False)
    ok = not failures
    report("assembly-oracle-equivalence", ok,
           "all assembled forms match the dense brute-force oracle to 1e-12"
           if ok else f"failures: {failures}")


def test_chnsd_mass_conservation(separation_run):
    records, diag, _ = separation_run
    tol = 500 * 1e-12 * max(1.0, abs(diag.mass0) + 2.0)
    ok_drift = diag.max_mass_drift <= tol

    # stationary pure phase stays fixed
    mesh = build_two_domain_mesh(cfgm.two_phase_geometry(), 1 / 8)
    cfg = chnsd.ChnsdConfig(chnsd_coefficients(0.05, 0.1, 1.0),
                            dt=0.005, t_end=0.05)
    ops = chnsd.precompute_systems(cfg, mesh)
    records2, state2, diag2 = chnsd.run_chnsd(
        cfg, mesh, lambda x, y: np.ones_like(x), ops=ops, n_steps=10)
    dev = np.abs(state2.phi.coefficients - 1.0).max()
    ok = ok_drift and dev <= 1e-12 \
        and np.abs(state2.u_f.coefficients).max() <= 1e-12
    report("chnsd-mass-conservation", ok,
           f"500-step drift {diag.max_mass_drift:.2e} (tol {tol:.2e}); "
           f"pure-phase deviation {dev:.2e} (tol 1e-12)")


def test_chnsd_energy_behavior(droplet_run, bubble_run):
    r0, ratios, records, diag = droplet_run
    mono = diag.max_energy_increase <= 1e-10 * max(1.0, diag.e0)
    shape_ok = ratios[-1] < r0 and abs(ratios[-1] - 1) < abs(r0 - 1)
    coms, brecords, bdiag = bubble_run
    rising = all(coms[i + 1] > coms[i] for i in range(len(coms) - 1))
    ok = mono and shape_ok and rising and diag.clamped_steps == 0
    report("chnsd-energy-behavior", ok,
           f"droplet: E nonincreasing (max inc {diag.max_energy_increase:.2e}), "
           f"clamped steps {diag.clamped_steps} (expected 0), "
           f"isoperimetric {r0:.3f} -> {ratios[-1]:.3f}; "
           f"bubble center of mass {coms[0]:.3f} -> {coms[-1]:.3f} "
           f"({'monotone rise' if rising else 'NOT monotone'})")


def test_xi_proximity(filtration_runs):
    lo = min(r.xi for records, _ in filtration_runs.values() for r in records)
    hi = max(r.xi for records, _ in filtration_runs.values() for r in records)
    ok = 0.9 <= lo and hi <= 1.1
    report("xi-proximity", ok,
           f"filtration layouts a-g at h=1/40: xi in [{lo:.4f}, {hi:.4f}] "
           "(window [0.9, 1.1])")


def test_factorization_reuse(dissipation_runs, separation_run):
    counts = [total for _, _, _, total in dissipation_runs]
    _, diag, chnsd_total = separation_run
    ok = all(c == 2 for c in counts) and chnsd_total == 2 + 500
    report("factorization-reuse", ok,
           f"flow runs factorized {counts} operators (expect 2 each); "
           f"two-phase run {chnsd_total} (expect 2 + 500 phase systems)")
