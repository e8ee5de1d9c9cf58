/**
 * Batch-sweep figure: verdict class and fitted rate against the swept
 * parameter, with an optional threshold marker (for horizon sweeps, the
 * detectability threshold 2 M0 dist supplied by the caller or read from a
 * verdict file).
 */

import { SchemaError, SweepRow } from "./artifacts.js";
import { frame, padDomain, LABEL_STYLE } from "./svg.js";

export interface SweepOptions {
  threshold?: number;
  width?: number;
  height?: number;
}

const CLASS_STYLES: Record<string, string> = {
  obstacle_positive_contrast: "fill:#1f77b4;stroke:none",
  obstacle_negative_contrast: "fill:#d62728;stroke:none",
  empty: "fill:none;stroke:#2ca02c;stroke-width:1.5",
  inconclusive: "fill:none;stroke:#999;stroke-width:1.5",
};
const FAILED_STYLE = "fill:none;stroke:#000;stroke-width:1";
const THRESHOLD_STYLE = "stroke:#d62728;stroke-width:1;stroke-dasharray:4 3";

export function renderSweep(
  meta: Record<string, string>,
  rows: SweepRow[],
  options: SweepOptions = {},
): string {
  if (rows.length === 0) throw new SchemaError("sweep batch has no rows");
  const width = options.width ?? 640;
  const height = options.height ?? 420;
  const param = rows[0].param;

  const xs = rows.map((r) => r.value);
  const rates = rows.filter((r) => r.rate !== null).map((r) => r.rate as number);
  const yLo = rates.length ? Math.min(...rates) : -1;
  const yHi = rates.length ? Math.max(...rates) : 1;
  let xDomain = padDomain(Math.min(...xs), Math.max(...xs));
  if (options.threshold !== undefined) {
    xDomain = padDomain(Math.min(xDomain[0], options.threshold),
                        Math.max(xDomain[1], options.threshold), 0.02);
  }
  const yDomain = padDomain(yLo, yHi, 0.15);
  const title = `sweep of ${param}  (${meta["scenario"] ?? "batch"})`;
  const { svg, sx, sy } = frame(width, height, xDomain, yDomain, param, "fitted rate", title);

  if (options.threshold !== undefined) {
    svg.line(sx(options.threshold), sy.range[0], sx(options.threshold), sy.range[1],
             THRESHOLD_STYLE);
    svg.text(sx(options.threshold) + 4, sy.range[1] + 12,
             `threshold ${options.threshold}`, LABEL_STYLE);
  }

  const yFloor = sy.range[0] - 8; // rate-less rows sit on the axis line
  for (const r of rows) {
    const style = r.status === "ok"
      ? CLASS_STYLES[r.className] ?? FAILED_STYLE
      : FAILED_STYLE;
    const y = r.rate === null ? yFloor : sy(r.rate);
    svg.circle(sx(r.value), y, 4, style);
  }

  // legend for the classes actually present
  const seen = [...new Set(rows.map((r) => (r.status === "ok" ? r.className : "failed")))];
  seen.forEach((name, i) => {
    const y = sy.range[1] + 14 * (i + 1) + 14;
    svg.circle(sx.range[0] + 10, y - 4, 4, CLASS_STYLES[name] ?? FAILED_STYLE);
    svg.text(sx.range[0] + 20, y, name, LABEL_STYLE);
  });
  return svg.toString();
}
