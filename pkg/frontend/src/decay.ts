/**
 * Indicator-decay and g-growth figures from one run's artifacts.
 *
 * The decay view scatters log|I| against tau, draws the fitted line whose
 * slope is exactly twice the verdict's rate estimate (annotated verbatim),
 * and, when the ground-truth distance travels with the verdict, shades the
 * admissible slope band [-2 M0 dist, -2 m0 dist].  The growth view shows
 * g = tau*T + log|I| with the fit window shaded, which is the monotonicity
 * evidence behind the classification.
 */

import { SchemaError, SeriesArtifact, VerdictArtifact } from "./artifacts.js";
import { frame, padDomain, LABEL_STYLE } from "./svg.js";

export interface DecayOptions {
  kind?: "decay" | "growth";
  /** draw the ground-truth slope band / threshold annotations (default on) */
  annotateTruth?: boolean;
  width?: number;
  height?: number;
}

const POINT_NEG = "fill:#1f77b4;stroke:none";     // indicator < 0
const POINT_POS = "fill:#d62728;stroke:none";     // indicator > 0
const POINT_TRIMMED = "fill:none;stroke:#999;stroke-width:1";
const FIT_STYLE = "stroke:#111;stroke-width:1.5";
const BAND_STYLE = "fill:#2ca02c;fill-opacity:0.12;stroke:none";
const WINDOW_STYLE = "fill:#9467bd;fill-opacity:0.10;stroke:none";

export function renderDecay(
  series: SeriesArtifact,
  verdict: VerdictArtifact,
  options: DecayOptions = {},
): string {
  const kind = options.kind ?? "decay";
  const annotateTruth = options.annotateTruth ?? true;
  const width = options.width ?? 640;
  const height = options.height ?? 420;

  const pts = series.rows
    .filter((r) => r.logAbsI !== null)
    .map((r) => ({
      tau: r.tau,
      y: (kind === "decay" ? r.logAbsI : r.g) as number,
      sign: r.sign,
      used: r.usedInFit,
    }));
  if (pts.length < 2) {
    throw new SchemaError(`need at least 2 finite series rows, got ${pts.length}`);
  }

  const xs = pts.map((p) => p.tau);
  const ys = pts.map((p) => p.y);
  const xDomain = padDomain(Math.min(...xs), Math.max(...xs));
  const yDomain = padDomain(Math.min(...ys), Math.max(...ys));
  const yLabel = kind === "decay" ? "log |I(tau)|" : "g(tau) = tau T + log |I|";
  const title =
    `${verdict.scenario} [${verdict.pipeline}]  class: ${verdict.class}` +
    (kind === "growth" ? "  (growth view)" : "");
  const { svg, sx, sy } = frame(width, height, xDomain, yDomain, "tau", yLabel, title);

  // fit window shading
  if (verdict.window) {
    const [wlo, whi] = verdict.window;
    svg.rect(sx(wlo), sy.range[1], sx(whi) - sx(wlo), sy.range[0] - sy.range[1], WINDOW_STYLE);
  }

  const anchor = pts.find((p) => p.used) ?? pts[0];

  if (kind === "decay" && verdict.rate_estimate !== null) {
    const slope = 2 * verdict.rate_estimate;
    // ground-truth admissible band, anchored where the fitted line is
    if (annotateTruth && verdict.dist_DB_true !== null && verdict.dist_DB_true !== undefined) {
      const sLo = -2 * verdict.M0 * verdict.dist_DB_true;
      const sHi = -2 * verdict.m0 * verdict.dist_DB_true;
      const corner = (s: number, x: number) => [sx(x), sy(anchor.y + s * (x - anchor.tau))] as [number, number];
      svg.polygon(
        [
          corner(sLo, xDomain[0]), corner(sLo, xDomain[1]),
          corner(sHi, xDomain[1]), corner(sHi, xDomain[0]),
        ],
        BAND_STYLE,
      );
      svg.text(sx.range[1] - 4, sy.range[1] + 26,
               `band slopes [${sLo}, ${sHi}]`, LABEL_STYLE, "end");
    }
    svg.line(
      sx(xDomain[0]), sy(anchor.y + slope * (xDomain[0] - anchor.tau)),
      sx(xDomain[1]), sy(anchor.y + slope * (xDomain[1] - anchor.tau)),
      FIT_STYLE,
    );
    svg.text(sx.range[1] - 4, sy.range[1] + 12, `fitted slope = ${slope}`, LABEL_STYLE, "end");
  }
  if (kind === "growth") {
    const dg = (verdict.diagnostics ?? {})["delta_g_full"];
    if (typeof dg === "number") {
      svg.text(sx.range[1] - 4, sy.range[1] + 12, `delta g (full) = ${dg}`, LABEL_STYLE, "end");
    }
  }

  for (const p of pts) {
    const style = !p.used ? POINT_TRIMMED : p.sign < 0 ? POINT_NEG : POINT_POS;
    svg.circle(sx(p.tau), sy(p.y), 3.2, style);
  }
  svg.text(sx.range[0] + 4, sy.range[1] + 12,
           `scenario_hash ${verdict.scenario_hash}  tool ${verdict.tool_version}`,
           LABEL_STYLE);
  return svg.toString();
}
