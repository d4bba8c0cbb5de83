"""Export of meshes, field snapshots, trace CSVs and quick-look figures."""

import hashlib

import numpy as np

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt


def vertex_values(mesh, field):
    """Field values at the mesh vertices (zero outside the field's domain).

    Quadratic fields are sampled at vertex dofs only; midpoint data is not
    exported (a lossy but standard visualization choice).
    """
    dm = field.dofmap
    comps = dm.components
    out = np.zeros((mesh.n_nodes, comps))
    covered = np.nonzero(dm.vertex_entity >= 0)[0]
    ents = dm.vertex_entity[covered]
    for c in range(comps):
        out[covered, c] = field.coefficients[ents * comps + c]
    return out[:, 0] if comps == 1 else out


def write_vtk(mesh, fields, path):
    """Legacy ASCII VTK unstructured grid with per-point scalars/vectors.

    fields: list of (name, values) where values is (n_nodes,) for scalars or
    (n_nodes, 2) for vectors (written with z = 0).
    """
    lines = ["# vtk DataFile Version 3.0", "two-domain flow snapshot",
             "ASCII", "DATASET UNSTRUCTURED_GRID",
             f"POINTS {mesh.n_nodes} double"]
    for x, y in mesh.nodes:
        lines.append(f"{x:.10g} {y:.10g} 0")
    nt = mesh.n_triangles
    lines.append(f"CELLS {nt} {4 * nt}")
    for a, b, c in mesh.triangles:
        lines.append(f"3 {a} {b} {c}")
    lines.append(f"CELL_TYPES {nt}")
    lines.extend(["5"] * nt)
    lines.append(f"POINT_DATA {mesh.n_nodes}")
    for name, values in fields:
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            lines.append(f"SCALARS {name} double 1")
            lines.append("LOOKUP_TABLE default")
            for v in values:
                lines.append(f"{v:.10g}")
        else:
            lines.append(f"VECTORS {name} double")
            for vx, vy in values:
                lines.append(f"{vx:.10g} {vy:.10g} 0")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def config_hash(items):
    text = ";".join(f"{k}={items[k]}" for k in sorted(items))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def write_trace(records, path, header_items=None):
    """CSV trace with one row per completed step, config hash in the header."""
    with open(path, "w", encoding="utf-8") as fh:
        if header_items:
            fh.write(f"# config_hash={config_hash(header_items)}\n")
            for k in ("seed", "experiment"):
                if k in header_items:
                    fh.write(f"# {k}={header_items[k]}\n")
        fh.write("step,t,E,xi,I,div_residual,mass,flags\n")
        for r in records:
            fh.write(f"{r.step},{r.t:.12g},{r.E:.12e},{r.xi:.12e},"
                     f"{r.I:.12e},{r.div_residual:.6e},{r.mass:.12e},{r.flags}\n")


def render_trace_figure(records, path):
    """Two panels: energy decay and the relaxation factor over time."""
    t = [r.t for r in records]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.4))
    ax1.plot(t, [r.E for r in records], "-", lw=1.2)
    ax1.set_xlabel("t")
    ax1.set_ylabel("E")
    ax1.set_title("energy")
    ax2.plot(t, [r.xi for r in records], "-", lw=1.2, color="tab:red")
    ax2.axhline(1.0, color="0.6", lw=0.8, ls="--")
    ax2.set_xlabel("t")
    ax2.set_ylabel(r"$\xi$")
    ax2.set_title("relaxation factor")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def render_convergence_figure(rows, rates, path, title=""):
    """Log-log error plot with fitted slopes and order guide lines."""
    dts = np.array([r["dt"] for r in rows])
    fig, ax = plt.subplots(figsize=(4.6, 3.6))
    for key, marker, label in (("err_u", "o", "u"), ("err_phi", "s", "phi"),
                               ("err_p", "^", "p")):
        errs = np.array([r[key] for r in rows])
        slope = rates.get(key.split("_")[1])
        lbl = f"{label} (slope {slope:.2f})" if slope is not None else label
        ax.loglog(dts, errs, marker + "-", ms=4, label=lbl)
    ref = np.array([dts.min(), dts.max()])
    e0 = np.array([r["err_phi"] for r in rows]).max()
    for order, style in ((1, ":"), (2, "--")):
        ax.loglog(ref, e0 * (ref / ref.max()) ** order, style, color="0.5",
                  lw=0.9, label=f"order {order}")
    ax.set_xlabel(r"$\Delta t$")
    ax.set_ylabel("error")
    if title:
        ax.set_title(title)
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
