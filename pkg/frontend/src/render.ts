#!/usr/bin/env node
/**
 * Render sweep CSVs into comparison figures, one SVG panel per CSV.
 *
 * Usage:
 *   node dist/render.js --csv a.csv b.csv --group-by q --out figures/ [--log-y]
 *
 * Each panel is labeled by the --group-by key looked up in the CSV's
 * .meta sidecar (falling back to the file name when absent).
 */

import { readFileSync, writeFileSync, existsSync, mkdirSync } from "node:fs";
import path from "node:path";
import { parseArgs } from "node:util";

import { aggregate } from "./aggregate.js";
import { parseMeta, parseSweepCsv } from "./csv.js";
import { renderPanel } from "./svg.js";

export interface RenderResult {
  csvPath: string;
  svgPath: string;
  label: string;
}

export function renderPanels(
  csvPaths: string[],
  groupBy: string,
  outDir: string,
  logY: boolean
): RenderResult[] {
  mkdirSync(outDir, { recursive: true });
  const results: RenderResult[] = [];
  for (const csvPath of csvPaths) {
    const rows = parseSweepCsv(readFileSync(csvPath, "utf-8"), csvPath);
    const metaPath = csvPath + ".meta";
    let label = path.basename(csvPath, ".csv");
    if (existsSync(metaPath)) {
      const meta = parseMeta(readFileSync(metaPath, "utf-8"));
      const value = meta.get(groupBy);
      if (value !== undefined) label = `${groupBy}=${value}`;
    }
    const svg = renderPanel(aggregate(rows), { title: label, logY });
    const svgPath = path.join(outDir, path.basename(csvPath, ".csv") + ".svg");
    writeFileSync(svgPath, svg);
    results.push({ csvPath, svgPath, label });
  }
  return results;
}

function main(argv: string[]): number {
  const { values, positionals } = parseArgs({
    args: argv,
    allowPositionals: true,
    options: {
      csv: { type: "string", multiple: true },
      "group-by": { type: "string", default: "q" },
      out: { type: "string", default: "." },
      "log-y": { type: "boolean", default: false },
    },
  });
  // `--csv a.csv b.csv` leaves the extra paths as positionals
  const csvPaths = [...(values.csv ?? []), ...positionals];
  if (csvPaths.length === 0) {
    console.error("error: at least one --csv path is required");
    return 2;
  }
  try {
    const results = renderPanels(csvPaths, values["group-by"]!, values.out!, values["log-y"]!);
    for (const r of results) {
      console.log(`${r.label}: ${r.csvPath} -> ${r.svgPath}`);
    }
    return 0;
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : err}`);
    return 1;
  }
}

if (process.argv[1] && import.meta.url.endsWith(path.basename(process.argv[1]))) {
  process.exit(main(process.argv.slice(2)));
}
