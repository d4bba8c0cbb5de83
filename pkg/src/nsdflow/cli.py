"""Command-line driver: runs the published experiments and the self-checks.

Synopsis:
    solver run <experiment> [--config FILE|LETTER] [--out DIR] [--seed N]
               [--case ex1|ex2] [--scheme 1|2]
    solver test-oracles

Each run writes a per-step trace CSV (plus a rendered figure) and, where the
experiment defines them, VTK snapshots and a convergence CSV.
"""

import argparse
import os
import sys

import numpy as np

from . import chnsd, config as cfg_mod, forms, mms, nsd, output
from .elements import Field, interpolate
from .mesh import Geometry, build_two_domain_mesh


def _load_run_config(experiment, args):
    lines = [f"experiment={experiment}"]
    if args.config:
        if os.path.exists(args.config):
            with open(args.config, "r", encoding="utf-8") as fh:
                text = fh.read()
            if "experiment" not in text:
                lines.append(text)
                text = "\n".join(lines)
            return cfg_mod.parse_config(text)
        if experiment == "filtration" and args.config in cfg_mod.FILTRATION_BLOCKS:
            lines.append(f"kconfig={args.config}")
        else:
            raise cfg_mod.ConfigError(
                f"--config: no such file and not a preset variant: {args.config!r}")
    if args.case:
        lines.append(f"case={args.case}")
    if args.scheme:
        lines.append(f"scheme={args.scheme}")
    if args.seed is not None:
        lines.append(f"seed={args.seed}")
    return cfg_mod.parse_config("\n".join(lines))


def _snapshot_steps(times, dt, n_steps):
    steps = {}
    for t in times:
        k = int(round(t / dt))
        if 0 <= k <= n_steps:
            steps[k] = t
    return steps


def run_convergence(rc, outdir):
    case = rc["case"]
    scheme = rc["scheme"]
    rows, rates = mms.convergence_study(case, scheme, rc["convection"],
                                        rc["h_list"], t_end=rc["t_end"])
    csv_path = os.path.join(outdir, f"convergence_{case}_{scheme}.csv")
    mms.write_convergence_csv(rows, csv_path)
    fig_path = csv_path.replace(".csv", ".png")
    output.render_convergence_figure(rows, rates, fig_path,
                                     title=f"{case}, scheme {scheme}")
    print(f"wrote {csv_path} and {fig_path}")
    for name in ("u", "phi", "p"):
        print(f"fitted {name} rate: {rates[name]:.3f}")
    lo, hi = (0.8, 1.2) if scheme == 1 else (1.7, 2.3)
    ok = lo <= rates["phi"] <= hi
    print(f"phi rate within [{lo}, {hi}]: {'yes' if ok else 'NO'}")
    return 0 if ok else 1


def run_filtration(rc, outdir):
    rng = np.random.default_rng(rc["seed"])
    mesh = build_two_domain_mesh(cfg_mod.filtration_geometry(), rc["h"])
    K = cfg_mod.filtration_conductivity(mesh, rc["kconfig"], rng)
    co = forms.FormCoefficients(nu=rc["nu"], g=rc["g"], s0=rc["s0"],
                                K=K, alpha=rc["alpha"])
    scheme_cfg = nsd.SchemeConfig(co, dt=rc["dt"], t_end=rc["t_end"],
                                  scheme=1, convection=rc["convection"])
    ops = nsd.precompute_systems(scheme_cfg, mesh)
    # the prescribed inflow profile carries net interface flux; project it
    # onto the discretely divergence-compatible space before stepping
    u0 = nsd.project_initial_velocity(
        ops, scheme_cfg, interpolate(ops.velocity,
                                     cfg_mod.filtration_initial_velocity))
    phi0 = Field(ops.head)
    n_steps = int(round(rc["t_end"] / rc["dt"]))
    snap = _snapshot_steps(rc["snapshot_times"], rc["dt"], n_steps)

    def on_record(state, rec):
        if rec.step in snap:
            path = os.path.join(outdir, f"filtration_{rc['kconfig']}_t{snap[rec.step]:g}.vtk")
            output.write_vtk(mesh, [
                ("velocity", output.vertex_values(mesh, state.u)),
                ("pressure", output.vertex_values(mesh, state.p)),
                ("head", output.vertex_values(mesh, state.phi))], path)

    records, state, diag = nsd.run_nsd(scheme_cfg, mesh, u0, phi0, ops=ops,
                                       n_steps=n_steps, on_record=on_record)
    header = dict(rc.params, experiment="filtration", seed=rc["seed"])
    trace = os.path.join(outdir, f"trace_filtration_{rc['kconfig']}.csv")
    output.write_trace(records, trace, header)
    output.render_trace_figure(records, trace.replace(".csv", ".png"))
    xis = [r.xi for r in records]
    print(f"wrote {trace}; xi in [{min(xis):.4f}, {max(xis):.4f}]")
    return 0


def _run_two_phase(rc, outdir, name, phi0, buoyancy=None):
    mesh = build_two_domain_mesh(cfg_mod.two_phase_geometry(), rc["h"])
    eps = rc["eps"]
    K = {"phase-separation": np.array([[0.5, 0.1], [0.1, 0.2]])}.get(
        rc.experiment, 0.01 * np.eye(2))
    co = forms.FormCoefficients(nu=1.0, g=1.0, s0=1.0, K=K, alpha=rc["alpha"],
                                nu_f=rc["nu_f"], nu_p=rc["nu_p"],
                                chi=rc["chi"], lam=rc["lam"], eps=eps,
                                mobility=cfg_mod.default_mobility(eps))
    run_cfg = chnsd.ChnsdConfig(co, dt=rc["dt"], t_end=rc["t_end"],
                                convection=rc["convection"], buoyancy=buoyancy)
    ops = chnsd.precompute_systems(run_cfg, mesh)
    n_steps = int(round(rc["t_end"] / rc["dt"]))
    snap = _snapshot_steps(rc["snapshot_times"], rc["dt"], n_steps)

    state0 = chnsd.initial_state(ops, run_cfg, phi0)
    if 0 in snap:
        output.write_vtk(mesh, [
            ("phase", output.vertex_values(mesh, state0.phi))],
            os.path.join(outdir, f"{name}_t0.vtk"))

    def on_record(state, rec):
        if rec.step in snap:
            uf = output.vertex_values(mesh, state.u_f)
            up = output.vertex_values(mesh, state.u_p)
            path = os.path.join(outdir, f"{name}_t{snap[rec.step]:g}.vtk")
            output.write_vtk(mesh, [
                ("phase", output.vertex_values(mesh, state.phi)),
                ("potential", output.vertex_values(mesh, state.mu)),
                ("velocity", uf + up)], path)

    records, state, diag = chnsd.run_chnsd(run_cfg, mesh, phi0, ops=ops,
                                           n_steps=n_steps, on_record=on_record)
    header = dict(rc.params, experiment=rc.experiment, seed=rc["seed"])
    trace = os.path.join(outdir, f"trace_{name}.csv")
    output.write_trace(records, trace, header)
    output.render_trace_figure(records, trace.replace(".csv", ".png"))
    print(f"wrote {trace}; E: {diag.e0:.6g} -> {state.energy:.6g}; "
          f"clamped steps: {diag.clamped_steps}; "
          f"max mass drift: {diag.max_mass_drift:.3e}")
    return 0


def run_phase_separation(rc, outdir):
    rng = np.random.default_rng(rc["seed"])
    return _run_two_phase(rc, outdir, "phase_separation",
                          cfg_mod.separation_initial_phase(rng))


def run_droplet(rc, outdir):
    phi0 = cfg_mod.droplet_initial_phase(rc["petals"], rc["eps"])
    return _run_two_phase(rc, outdir, f"droplet_n{rc['petals']}", phi0)


def run_bubble(rc, outdir):
    if rc["bubbles"] == 2:
        centers = [(0.35, 0.4), (0.65, 0.5)]
        buoyancy = (0.0, 8.0)
    else:
        centers = [(rc["x0"], rc["y0"])]
        buoyancy = rc["buoyancy"]
    phi0 = cfg_mod.bubble_initial_phase(rc["radius"], centers, rc["eps"])
    return _run_two_phase(rc, outdir, f"bubble_{rc['bubbles']}", phi0,
                          buoyancy=buoyancy)


def run_custom(rc, outdir):
    mesh = build_two_domain_mesh(Geometry((0, 1, 0, 1), (0, 1, -1, 0)), rc["h"])
    co = forms.FormCoefficients(nu=rc["nu"], g=rc["g"], s0=rc["s0"],
                                alpha=rc["alpha"])
    scheme_cfg = nsd.SchemeConfig(co, dt=rc["dt"], t_end=rc["t_end"],
                                  scheme=rc["scheme"],
                                  convection=rc["convection"])
    ops = nsd.precompute_systems(scheme_cfg, mesh)
    rng = np.random.default_rng(rc["seed"])
    u0 = Field(ops.velocity, rng.standard_normal(ops.velocity.total_dofs))
    u0.coefficients[ops.fluid_dirichlet] = 0.0
    phi0 = Field(ops.head, rng.standard_normal(ops.head.total_dofs))
    phi0.coefficients[ops.head_dirichlet] = 0.0
    records, state, diag = nsd.run_nsd(scheme_cfg, mesh, u0, phi0, ops=ops)
    trace = os.path.join(outdir, "trace_custom.csv")
    output.write_trace(records, trace,
                       dict(rc.params, experiment="custom", seed=rc["seed"]))
    output.render_trace_figure(records, trace.replace(".csv", ".png"))
    print(f"wrote {trace}; E: {diag.e0:.6g} -> {state.energy:.6g}")
    return 0


def run_test_oracles(_args):
    """Dense-assembly and forcing-derivation cross checks, printed pass/fail."""
    from .oracles import run_all
    failures = run_all(verbose=True)
    return 1 if failures else 0


_RUNNERS = {
    "convergence": run_convergence,
    "filtration": run_filtration,
    "phase-separation": run_phase_separation,
    "droplet": run_droplet,
    "bubble": run_bubble,
    "custom": run_custom,
}


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="solver",
        description="Energy-dissipative solvers for coupled free-flow / "
                    "porous-media models")
    sub = parser.add_subparsers(dest="command", required=True)
    runp = sub.add_parser("run", help="run an experiment")
    runp.add_argument("experiment", choices=cfg_mod.EXPERIMENTS)
    runp.add_argument("--config", default=None,
                      help="config file (key=value) or a filtration layout a..g")
    runp.add_argument("--out", default=".", help="output directory")
    runp.add_argument("--seed", type=int, default=None)
    runp.add_argument("--case", choices=("ex1", "ex2"), default=None)
    runp.add_argument("--scheme", type=int, choices=(1, 2), default=None)
    sub.add_parser("test-oracles", help="run the assembly/forcing self checks")

    args = parser.parse_args(argv)
    if args.command == "test-oracles":
        return run_test_oracles(args)

    try:
        rc = _load_run_config(args.experiment, args)
    except cfg_mod.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    os.makedirs(args.out, exist_ok=True)
    try:
        return _RUNNERS[args.experiment](rc, args.out)
    except AssertionError as exc:
        print(f"runtime assertion failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
