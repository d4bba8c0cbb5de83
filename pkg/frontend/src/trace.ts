/**
 * Two-panel time trace: discrete energy on the left, relaxation factor on
 * the right with the xi = 1 reference line.
 */

import { TraceRow } from "./csv.js";
import { SvgScene, linearScale, sciLabel } from "./svg.js";

function panel(scene: SvgScene, rows: TraceRow[], value: (r: TraceRow) => number,
               x0: number, x1: number, label: string, color: string,
               refLine?: number): void {
  const top = 36;
  const bottom = scene.height - 42;
  const ts = rows.map((r) => r.t);
  const vs = rows.map(value);
  let lo = Math.min(...vs, ...(refLine !== undefined ? [refLine] : []));
  let hi = Math.max(...vs, ...(refLine !== undefined ? [refLine] : []));
  if (lo === hi) {
    lo -= 0.5;
    hi += 0.5;
  }
  const pad = 0.06 * (hi - lo);
  const sx = linearScale(Math.min(...ts), Math.max(...ts), x0, x1);
  const sy = linearScale(lo - pad, hi + pad, bottom, top);

  scene.line(x0, top, x0, bottom);
  scene.line(x0, bottom, x1, bottom);
  for (const f of [0, 0.5, 1]) {
    const tv = Math.min(...ts) + f * (Math.max(...ts) - Math.min(...ts));
    scene.text(sx(tv), bottom + 15, sciLabel(tv), { anchor: "middle", size: 9 });
  }
  for (const f of [0, 0.5, 1]) {
    const vv = lo - pad + f * (hi - lo + 2 * pad);
    scene.text(x0 - 5, sy(vv) + 3, sciLabel(vv), { anchor: "end", size: 9 });
  }
  if (refLine !== undefined) {
    scene.line(x0, sy(refLine), x1, sy(refLine), "#999", 0.8, "4 3");
  }
  scene.polyline(rows.map((r) => [sx(r.t), sy(value(r))]), color);
  scene.text((x0 + x1) / 2, 22, label, { anchor: "middle", size: 12 });
  scene.text((x0 + x1) / 2, scene.height - 10, "t", { anchor: "middle", size: 11 });
}

export function renderTrace(rows: TraceRow[], title = ""): string {
  const W = 760;
  const H = 330;
  const scene = new SvgScene(W, H);
  panel(scene, rows, (r) => r.E, 64, W / 2 - 28, "energy", "#1f77b4");
  panel(scene, rows, (r) => r.xi, W / 2 + 52, W - 24,
        "relaxation factor", "#d62728", 1.0);
  if (title) {
    scene.text(W / 2, 12, title, { anchor: "middle", size: 11 });
  }
  return scene.render();
}
