/**
 * Log-log convergence figure: velocity/head errors against the time step,
 * least-squares slope annotations, and order-1 / order-2 guide triangles.
 */

import { ConvergenceRow } from "./csv.js";
import { fittedRate } from "./fit.js";
import { SvgScene, logScale, decadeTicks, sciLabel } from "./svg.js";

export interface ConvergenceFigure {
  svg: string;
  slopes: { u: number; phi: number; p: number };
}

const SERIES: Array<{ key: keyof ConvergenceRow; label: string; color: string }> = [
  { key: "err_u", label: "velocity", color: "#1f77b4" },
  { key: "err_phi", label: "head", color: "#d62728" },
  { key: "err_p", label: "pressure", color: "#2ca02c" },
];

export function renderConvergence(rows: ConvergenceRow[],
                                  title = ""): ConvergenceFigure {
  const W = 560;
  const H = 420;
  const m = { top: 34, right: 20, bottom: 46, left: 64 };

  const dts = rows.map((r) => r.dt);
  const allErrs = rows.flatMap((r) => [r.err_u, r.err_phi, r.err_p]);
  const positives = allErrs.filter((e) => e > 0);
  if (positives.length === 0) {
    throw new Error("all error columns are zero; nothing to plot");
  }
  const xLo = Math.min(...dts);
  const xHi = Math.max(...dts);
  const yLo = Math.min(...positives);
  const yHi = Math.max(...positives);
  const sx = logScale(xLo, xHi, m.left, W - m.right);
  const sy = logScale(yLo / 1.5, yHi * 1.5, H - m.bottom, m.top);

  const scene = new SvgScene(W, H);
  // frame and decade grid
  scene.line(m.left, m.top, m.left, H - m.bottom);
  scene.line(m.left, H - m.bottom, W - m.right, H - m.bottom);
  for (const t of decadeTicks(xLo, xHi)) {
    const x = sx(t);
    scene.line(x, H - m.bottom, x, m.top, "#ddd", 0.6);
    scene.text(x, H - m.bottom + 16, sciLabel(t), { anchor: "middle" });
  }
  for (const t of decadeTicks(yLo / 1.5, yHi * 1.5)) {
    const y = sy(t);
    scene.line(m.left, y, W - m.right, y, "#ddd", 0.6);
    scene.text(m.left - 6, y + 3, sciLabel(t), { anchor: "end", size: 10 });
  }
  scene.text((m.left + W - m.right) / 2, H - 10, "time step", {
    anchor: "middle", size: 12,
  });
  scene.text(16, (m.top + H - m.bottom) / 2, "error", {
    anchor: "middle", size: 12, rotate: -90,
  });
  if (title) {
    scene.text(W / 2, 18, title, { anchor: "middle", size: 13 });
  }

  const slopes = {
    u: fittedRate(dts, rows.map((r) => r.err_u)),
    phi: fittedRate(dts, rows.map((r) => r.err_phi)),
    p: fittedRate(dts, rows.map((r) => r.err_p)),
  };

  SERIES.forEach((s, i) => {
    const pts: Array<[number, number]> = rows.map((r) => [
      sx(r.dt),
      sy(r[s.key] as number),
    ]);
    scene.polyline(pts, s.color);
    for (const [x, y] of pts) {
      scene.circle(x, y, 2.6, s.color);
    }
    const slope = s.key === "err_u" ? slopes.u
      : s.key === "err_phi" ? slopes.phi : slopes.p;
    scene.text(W - m.right - 6, m.top + 16 + 15 * i,
               `${s.label}: slope ${slope.toFixed(2)}`,
               { anchor: "end", fill: s.color });
  });

  // order guide lines anchored at the coarsest head error
  const anchor = Math.max(...rows.map((r) => r.err_phi));
  for (const order of [1, 2]) {
    const pts: Array<[number, number]> = dts.map((dt) => [
      sx(dt),
      sy(anchor * 1.6 * (dt / xHi) ** order),
    ]);
    scene.polyline(pts, "#888", 0.9, order === 1 ? "4 3" : "1.5 2.5");
    scene.text(pts[pts.length - 1][0] + 4, pts[pts.length - 1][1],
               `order ${order}`, { size: 9, fill: "#666" });
  }

  return { svg: scene.render(), slopes };
}
