/**
 * Minimal hand-rolled SVG scene: axes, polylines, markers and labels.
 * No DOM or canvas dependency, so figures render in any headless node.
 */

export interface Margins {
  top: number;
  right: number;
  bottom: number;
  left: number;
}

export type Scale = (v: number) => number;

export function linearScale(
  lo: number,
  hi: number,
  outLo: number,
  outHi: number
): Scale {
  const span = hi - lo || 1;
  return (v) => outLo + ((v - lo) / span) * (outHi - outLo);
}

export function logScale(
  lo: number,
  hi: number,
  outLo: number,
  outHi: number
): Scale {
  if (lo <= 0 || hi <= 0) {
    throw new Error("log scale requires positive bounds");
  }
  const l0 = Math.log10(lo);
  const l1 = Math.log10(hi);
  const span = l1 - l0 || 1;
  return (v) => outLo + ((Math.log10(v) - l0) / span) * (outHi - outLo);
}

export function esc(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

export class SvgScene {
  private parts: string[] = [];

  constructor(readonly width: number, readonly height: number) {
    this.parts.push(
      `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" ` +
        `height="${height}" viewBox="0 0 ${width} ${height}" ` +
        `font-family="Helvetica, Arial, sans-serif">`,
      `<rect width="${width}" height="${height}" fill="white"/>`
    );
  }

  line(x1: number, y1: number, x2: number, y2: number, stroke = "#444",
       width = 1, dash = ""): void {
    const d = dash ? ` stroke-dasharray="${dash}"` : "";
    this.parts.push(
      `<line x1="${x1.toFixed(2)}" y1="${y1.toFixed(2)}" ` +
        `x2="${x2.toFixed(2)}" y2="${y2.toFixed(2)}" ` +
        `stroke="${stroke}" stroke-width="${width}"${d}/>`
    );
  }

  polyline(pts: Array<[number, number]>, stroke: string, width = 1.5,
           dash = ""): void {
    const d = dash ? ` stroke-dasharray="${dash}"` : "";
    const p = pts.map(([x, y]) => `${x.toFixed(2)},${y.toFixed(2)}`).join(" ");
    this.parts.push(
      `<polyline points="${p}" fill="none" stroke="${stroke}" ` +
        `stroke-width="${width}"${d}/>`
    );
  }

  circle(x: number, y: number, r: number, fill: string): void {
    this.parts.push(
      `<circle cx="${x.toFixed(2)}" cy="${y.toFixed(2)}" r="${r}" fill="${fill}"/>`
    );
  }

  text(x: number, y: number, content: string, opts: {
    size?: number; anchor?: string; fill?: string; rotate?: number;
  } = {}): void {
    const { size = 11, anchor = "start", fill = "#222", rotate } = opts;
    const tr = rotate !== undefined
      ? ` transform="rotate(${rotate} ${x.toFixed(2)} ${y.toFixed(2)})"`
      : "";
    this.parts.push(
      `<text x="${x.toFixed(2)}" y="${y.toFixed(2)}" font-size="${size}" ` +
        `text-anchor="${anchor}" fill="${fill}"${tr}>${esc(content)}</text>`
    );
  }

  render(): string {
    return this.parts.join("\n") + "\n</svg>\n";
  }
}

/** Decade tick values covering [lo, hi]. */
export function decadeTicks(lo: number, hi: number): number[] {
  const ticks: number[] = [];
  for (let e = Math.ceil(Math.log10(lo)); e <= Math.floor(Math.log10(hi)); e++) {
    ticks.push(10 ** e);
  }
  if (ticks.length === 0) {
    ticks.push(lo, hi);
  }
  return ticks;
}

export function sciLabel(v: number): string {
  const e = Math.floor(Math.log10(Math.abs(v)));
  if (e >= -2 && e <= 3) {
    return String(Number(v.toPrecision(3)));
  }
  return `1e${e}`;
}
