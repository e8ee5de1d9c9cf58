/** Minimal deterministic SVG assembly: no DOM, no randomness, plain strings. */

export interface Scale {
  (x: number): number;
  domain: [number, number];
  range: [number, number];
}

export function linearScale(domain: [number, number], range: [number, number]): Scale {
  const [d0, d1] = domain;
  const [r0, r1] = range;
  const k = d1 === d0 ? 0 : (r1 - r0) / (d1 - d0);
  const f = ((x: number) => r0 + (x - d0) * k) as Scale;
  f.domain = domain;
  f.range = range;
  return f;
}

/** Round tick positions covering a domain, at most `count` of them. */
export function ticks(domain: [number, number], count = 6): number[] {
  const [lo, hi] = domain;
  if (!(hi > lo)) return [lo];
  const raw = (hi - lo) / count;
  const mag = Math.pow(10, Math.floor(Math.log10(raw)));
  const step = [1, 2, 2.5, 5, 10].map((m) => m * mag).find((s) => (hi - lo) / s <= count) ?? mag * 10;
  const out: number[] = [];
  for (let t = Math.ceil(lo / step) * step; t <= hi + 1e-12 * step; t += step) {
    out.push(Math.abs(t) < step * 1e-9 ? 0 : t);
  }
  return out;
}

function esc(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;").replace(/"/g, "&quot;");
}

function fmt(x: number): string {
  return Number(x.toFixed(3)).toString();
}

export class Svg {
  private parts: string[] = [];

  constructor(readonly width: number, readonly height: number) {}

  line(x1: number, y1: number, x2: number, y2: number, style: string): void {
    this.parts.push(
      `<line x1="${fmt(x1)}" y1="${fmt(y1)}" x2="${fmt(x2)}" y2="${fmt(y2)}" style="${style}"/>`,
    );
  }

  circle(cx: number, cy: number, r: number, style: string): void {
    this.parts.push(`<circle cx="${fmt(cx)}" cy="${fmt(cy)}" r="${fmt(r)}" style="${style}"/>`);
  }

  rect(x: number, y: number, w: number, h: number, style: string): void {
    this.parts.push(
      `<rect x="${fmt(x)}" y="${fmt(y)}" width="${fmt(w)}" height="${fmt(h)}" style="${style}"/>`,
    );
  }

  polygon(points: Array<[number, number]>, style: string): void {
    const pts = points.map(([x, y]) => `${fmt(x)},${fmt(y)}`).join(" ");
    this.parts.push(`<polygon points="${pts}" style="${style}"/>`);
  }

  text(x: number, y: number, content: string, style: string, anchor = "start"): void {
    this.parts.push(
      `<text x="${fmt(x)}" y="${fmt(y)}" text-anchor="${anchor}" style="${style}">${esc(content)}</text>`,
    );
  }

  toString(): string {
    return (
      `<svg xmlns="http://www.w3.org/2000/svg" width="${this.width}" height="${this.height}" ` +
      `viewBox="0 0 ${this.width} ${this.height}">\n` +
      `<rect x="0" y="0" width="${this.width}" height="${this.height}" style="fill:white"/>\n` +
      this.parts.join("\n") +
      `\n</svg>\n`
    );
  }
}

export const AXIS_STYLE = "stroke:#333;stroke-width:1";
export const GRID_STYLE = "stroke:#ddd;stroke-width:0.5";
export const LABEL_STYLE = "font-family:monospace;font-size:11px;fill:#333";
export const TITLE_STYLE = "font-family:monospace;font-size:13px;fill:#111";

export interface Frame {
  svg: Svg;
  sx: Scale;
  sy: Scale;
}

/** Axes, grid and tick labels for a plot area inside fixed margins. */
export function frame(
  width: number,
  height: number,
  xDomain: [number, number],
  yDomain: [number, number],
  xLabel: string,
  yLabel: string,
  title: string,
): Frame {
  const m = { left: 70, right: 20, top: 34, bottom: 42 };
  const svg = new Svg(width, height);
  const sx = linearScale(xDomain, [m.left, width - m.right]);
  const sy = linearScale(yDomain, [height - m.bottom, m.top]);
  for (const t of ticks(xDomain)) {
    svg.line(sx(t), sy.range[0], sx(t), sy.range[1], GRID_STYLE);
    svg.text(sx(t), height - m.bottom + 16, String(t), LABEL_STYLE, "middle");
  }
  for (const t of ticks(yDomain)) {
    svg.line(sx.range[0], sy(t), sx.range[1], sy(t), GRID_STYLE);
    svg.text(m.left - 6, sy(t) + 4, String(t), LABEL_STYLE, "end");
  }
  svg.line(m.left, sy.range[0], width - m.right, sy.range[0], AXIS_STYLE);
  svg.line(m.left, sy.range[0], m.left, sy.range[1], AXIS_STYLE);
  svg.text(width / 2, height - 8, xLabel, LABEL_STYLE, "middle");
  svg.text(14, m.top - 12, yLabel, LABEL_STYLE);
  svg.text(m.left, 18, title, TITLE_STYLE);
  return { svg, sx, sy };
}

export function padDomain(lo: number, hi: number, frac = 0.06): [number, number] {
  const pad = (hi - lo || 1) * frac;
  return [lo - pad, hi + pad];
}
