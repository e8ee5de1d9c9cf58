/**
 * Command line: render run artifacts to SVG files.
 *
 *   node dist/cli.js decay --series series.csv --verdict verdict.json \
 *       --out decay.svg [--kind decay|growth] [--no-truth-band]
 *   node dist/cli.js sweep --batch sweep.csv --out sweep.svg [--threshold 5.8]
 */

import { readFileSync, writeFileSync } from "node:fs";
import { parseSeriesCsv, parseSweepCsv, parseVerdict, SchemaError } from "./artifacts.js";
import { renderDecay } from "./decay.js";
import { renderSweep } from "./sweep.js";

function parseArgs(argv: string[]): { cmd: string; flags: Map<string, string | boolean> } {
  const [cmd, ...rest] = argv;
  const flags = new Map<string, string | boolean>();
  for (let i = 0; i < rest.length; i++) {
    const tok = rest[i];
    if (!tok.startsWith("--")) throw new SchemaError(`unexpected argument ${tok}`);
    const name = tok.slice(2);
    if (name === "no-truth-band") {
      flags.set(name, true);
    } else {
      const val = rest[++i];
      if (val === undefined) throw new SchemaError(`flag --${name} needs a value`);
      flags.set(name, val);
    }
  }
  return { cmd, flags };
}

function need(flags: Map<string, string | boolean>, name: string): string {
  const v = flags.get(name);
  if (typeof v !== "string") throw new SchemaError(`missing required flag --${name}`);
  return v;
}

function slurp(path: string): string {
  try {
    return readFileSync(path, "utf8");
  } catch (e) {
    throw new SchemaError(`cannot read ${path}: ${(e as Error).message}`);
  }
}

export function main(argv: string[]): number {
  let parsed;
  try {
    parsed = parseArgs(argv);
    const { cmd, flags } = parsed;
    if (cmd === "decay") {
      const series = parseSeriesCsv(slurp(need(flags, "series")));
      const verdict = parseVerdict(slurp(need(flags, "verdict")));
      const kindFlag = flags.get("kind");
      const svg = renderDecay(series, verdict, {
        kind: kindFlag === "growth" ? "growth" : "decay",
        annotateTruth: !flags.get("no-truth-band"),
      });
      writeFileSync(need(flags, "out"), svg);
      return 0;
    }
    if (cmd === "sweep") {
      const { meta, rows } = parseSweepCsv(slurp(need(flags, "batch")));
      const thr = flags.get("threshold");
      const svg = renderSweep(meta, rows, {
        threshold: typeof thr === "string" ? Number(thr) : undefined,
      });
      writeFileSync(need(flags, "out"), svg);
      return 0;
    }
    console.error(`unknown subcommand ${cmd}; use "decay" or "sweep"`);
    return 2;
  } catch (e) {
    if (e instanceof SchemaError) {
      console.error(`error: ${e.message}`);
      return 1;
    }
    throw e;
  }
}

if (process.argv[1] && process.argv[1].endsWith("cli.js")) {
  process.exit(main(process.argv.slice(2)));
}
