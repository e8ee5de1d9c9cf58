/**
 * Readers for the run artifacts (series CSV, verdict JSON, sweep CSV).
 *
 * These are pure views: nothing here recomputes physics, every number in a
 * figure must originate from one of these files.  Parsers validate the
 * documented schemas and fail loudly on drift.
 */

export class SchemaError extends Error {}

export interface SeriesRow {
  tau: number;
  sign: number;
  /** natural log of |I|; null encodes an exact-zero indicator entry */
  logAbsI: number | null;
  g: number | null;
  s: number | null;
  floorLog: number | null;
  usedInFit: boolean;
}

export interface SeriesArtifact {
  meta: Record<string, string>;
  rows: SeriesRow[];
}

export interface VerdictArtifact {
  class: string;
  rate_estimate: number | null;
  rate_linear: number | null;
  distance_band: [number, number] | null;
  window: [number, number, number] | null;
  diagnostics: Record<string, unknown>;
  certificates: Record<string, unknown>;
  pipeline: string;
  strategy: string;
  scenario: string;
  scenario_hash: string;
  tool_version: string;
  mode: string;
  T: number;
  m0: number;
  M0: number;
  dist_DB_true: number | null;
}

export interface SweepRow {
  param: string;
  value: number;
  status: string;
  className: string;
  rate: number | null;
  distLo: number | null;
  distHi: number | null;
  runDir: string;
}

function parseMaybeNumber(cell: string): number | null {
  if (cell === "" || cell === "-inf") return null;
  const x = Number(cell);
  if (Number.isNaN(x)) throw new SchemaError(`not a number: ${JSON.stringify(cell)}`);
  return x;
}

function splitCsv(text: string): { meta: Record<string, string>; header: string[]; lines: string[][] } {
  const meta: Record<string, string> = {};
  const rows: string[][] = [];
  let header: string[] | null = null;
  for (const raw of text.split(/\r?\n/)) {
    const line = raw.trim();
    if (line === "") continue;
    if (line.startsWith("#")) {
      for (const tok of line.slice(1).trim().split(/\s+/)) {
        const eq = tok.indexOf("=");
        if (eq > 0) meta[tok.slice(0, eq)] = tok.slice(eq + 1);
      }
      continue;
    }
    if (header === null) {
      header = line.split(",");
    } else {
      rows.push(line.split(","));
    }
  }
  if (header === null) throw new SchemaError("CSV has no header row");
  return { meta, header, lines: rows };
}

const SERIES_COLUMNS = ["tau", "sign", "log_abs_I", "g", "s", "floor_log", "used_in_fit"];

/** Parse a `series_<pipeline>.csv` artifact. */
export function parseSeriesCsv(text: string): SeriesArtifact {
  const { meta, header, lines } = splitCsv(text);
  if (JSON.stringify(header) !== JSON.stringify(SERIES_COLUMNS)) {
    throw new SchemaError(
      `series CSV columns ${JSON.stringify(header)} do not match the schema ${JSON.stringify(SERIES_COLUMNS)}`,
    );
  }
  const rows = lines.map((cells) => {
    if (cells.length !== SERIES_COLUMNS.length) {
      throw new SchemaError(`series row has ${cells.length} cells: ${cells.join(",")}`);
    }
    return {
      tau: Number(cells[0]),
      sign: Number(cells[1]),
      logAbsI: parseMaybeNumber(cells[2]),
      g: parseMaybeNumber(cells[3]),
      s: parseMaybeNumber(cells[4]),
      floorLog: parseMaybeNumber(cells[5]),
      usedInFit: cells[6] === "1",
    };
  });
  return { meta, rows };
}

/** Parse a `verdict_<pipeline>.json` artifact. */
export function parseVerdict(text: string): VerdictArtifact {
  let doc: Record<string, unknown>;
  try {
    doc = JSON.parse(text);
  } catch (e) {
    throw new SchemaError(`verdict is not valid JSON: ${e}`);
  }
  for (const key of ["class", "pipeline", "scenario_hash", "tool_version", "T", "m0", "M0"]) {
    if (!(key in doc)) throw new SchemaError(`verdict JSON is missing "${key}"`);
  }
  return doc as unknown as VerdictArtifact;
}

const SWEEP_COLUMNS = ["param", "value", "status", "class", "rate", "dist_lo", "dist_hi", "run_dir"];

/** Parse a `sweep.csv` batch artifact. */
export function parseSweepCsv(text: string): { meta: Record<string, string>; rows: SweepRow[] } {
  const { meta, header, lines } = splitCsv(text);
  if (JSON.stringify(header) !== JSON.stringify(SWEEP_COLUMNS)) {
    throw new SchemaError(
      `sweep CSV columns ${JSON.stringify(header)} do not match the schema ${JSON.stringify(SWEEP_COLUMNS)}`,
    );
  }
  const rows = lines.map((cells) => ({
    param: cells[0],
    value: Number(cells[1]),
    status: cells[2],
    className: cells[3],
    rate: parseMaybeNumber(cells[4] === "None" ? "" : cells[4]),
    distLo: parseMaybeNumber(cells[5]),
    distHi: parseMaybeNumber(cells[6]),
    runDir: cells[7],
  }));
  return { meta, rows };
}
