import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import { describe, expect, it } from "vitest";

import { parseSeriesCsv, parseSweepCsv, parseVerdict, SchemaError } from "../src/artifacts.js";
import { renderDecay } from "../src/decay.js";
import { renderSweep } from "../src/sweep.js";

const FIXTURES = join(dirname(fileURLToPath(import.meta.url)), "..", "fixtures");
const series = parseSeriesCsv(readFileSync(join(FIXTURES, "series_elliptic.csv"), "utf8"));
const verdict = parseVerdict(readFileSync(join(FIXTURES, "verdict_elliptic.json"), "utf8"));
const sweep = parseSweepCsv(readFileSync(join(FIXTURES, "sweep.csv"), "utf8"));

describe("decay figure", () => {
  it("annotates the fitted slope exactly as twice the verdict rate", () => {
    const svg = renderDecay(series, verdict);
    const m = svg.match(/fitted slope = ([-+0-9.eE]+)/);
    expect(m).not.toBeNull();
    // view-only property: the annotation is the artifact's number verbatim
    expect(Number(m![1])).toBe(2 * (verdict.rate_estimate as number));
    expect(svg).toContain("</svg>");
  });

  it("shades the admissible band when ground truth is present", () => {
    const svg = renderDecay(series, verdict);
    expect(svg).toContain("polygon");
    expect(svg).toContain(`band slopes [${-2 * verdict.M0 * (verdict.dist_DB_true as number)}`);
  });

  it("omits the band without ground truth or when disabled", () => {
    const noTruth = { ...verdict, dist_DB_true: null };
    expect(renderDecay(series, noTruth)).not.toContain("polygon");
    expect(renderDecay(series, verdict, { annotateTruth: false })).not.toContain("polygon");
  });

  it("renders the growth view with the g column", () => {
    const svg = renderDecay(series, verdict, { kind: "growth" });
    expect(svg).toContain("g(tau)");
    expect(svg).toContain("delta g");
  });

  it("accepts a two-row minimal series", () => {
    const minimal = {
      meta: {},
      rows: series.rows.slice(0, 2),
    };
    const svg = renderDecay(minimal, verdict);
    expect(svg).toContain("</svg>");
  });

  it("rejects an empty or single-point series", () => {
    expect(() => renderDecay({ meta: {}, rows: [] }, verdict)).toThrow(SchemaError);
    expect(() => renderDecay({ meta: {}, rows: series.rows.slice(0, 1) }, verdict))
      .toThrow(SchemaError);
  });

  it("is deterministic", () => {
    expect(renderDecay(series, verdict)).toBe(renderDecay(series, verdict));
  });

  it("embeds provenance from the artifacts", () => {
    const svg = renderDecay(series, verdict);
    expect(svg).toContain(verdict.scenario_hash);
    expect(svg).toContain(verdict.tool_version);
  });
});

describe("sweep figure", () => {
  it("renders classes and the threshold marker", () => {
    const svg = renderSweep(sweep.meta, sweep.rows, { threshold: 5.8 });
    expect(svg).toContain("threshold 5.8");
    expect(svg).toContain("obstacle_positive_contrast");
    expect(svg).toContain("empty");
  });

  it("renders without a threshold", () => {
    const svg = renderSweep(sweep.meta, sweep.rows);
    expect(svg).not.toContain("threshold");
    expect(svg).toContain("</svg>");
  });

  it("accepts a single-row batch", () => {
    const svg = renderSweep(sweep.meta, sweep.rows.slice(0, 1));
    expect(svg).toContain("</svg>");
  });

  it("rejects an empty batch", () => {
    expect(() => renderSweep({}, [])).toThrow(SchemaError);
  });
});
