export { parseSeriesCsv, parseSweepCsv, parseVerdict, SchemaError } from "./artifacts.js";
export type { SeriesArtifact, SeriesRow, SweepRow, VerdictArtifact } from "./artifacts.js";
export { renderDecay } from "./decay.js";
export type { DecayOptions } from "./decay.js";
export { renderSweep } from "./sweep.js";
export type { SweepOptions } from "./sweep.js";
