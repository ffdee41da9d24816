/**
 * Reader for the sweep result CSV and its key=value .meta sidecar.
 *
 * Expected header:
 *   algorithm,budget_queries_per_task,trial,error_fraction,clustering_ok,p_hat,q_hat,seed
 *
 * Rows with an empty error_fraction (failed cells) are skipped.
 */

export interface SweepRow {
  algorithm: string;
  budget: number;
  trial: number;
  errorFraction: number;
  clusteringOk: boolean | null;
  pHat: number | null;
  qHat: number | null;
  seed: string;
}

export const REQUIRED_COLUMNS = [
  "algorithm",
  "budget_queries_per_task",
  "trial",
  "error_fraction",
  "clustering_ok",
  "p_hat",
  "q_hat",
  "seed",
] as const;

export class SchemaError extends Error {}
export class EmptyPlotError extends Error {}

export function parseSweepCsv(text: string, source = "<csv>"): SweepRow[] {
  const lines = text.split(/\r?\n/).filter((line) => line.length > 0);
  if (lines.length === 0) {
    throw new SchemaError(`${source}: file is empty`);
  }
  const header = lines[0].split(",");
  const index = new Map(header.map((name, i) => [name, i]));
  for (const column of REQUIRED_COLUMNS) {
    if (!index.has(column)) {
      throw new SchemaError(`${source}: missing required column "${column}"`);
    }
  }
  const col = (fields: string[], name: string) => fields[index.get(name)!] ?? "";

  const rows: SweepRow[] = [];
  for (const line of lines.slice(1)) {
    const fields = line.split(",");
    const errText = col(fields, "error_fraction");
    if (errText === "") continue; // failed cell, recorded in diagnostics
    const okText = col(fields, "clustering_ok");
    rows.push({
      algorithm: col(fields, "algorithm"),
      budget: Number(col(fields, "budget_queries_per_task")),
      trial: Number(col(fields, "trial")),
      errorFraction: Number(errText),
      clusteringOk: okText === "" ? null : okText === "true",
      pHat: col(fields, "p_hat") === "" ? null : Number(col(fields, "p_hat")),
      qHat: col(fields, "q_hat") === "" ? null : Number(col(fields, "q_hat")),
      seed: col(fields, "seed"),
    });
  }
  if (rows.length === 0) {
    throw new EmptyPlotError(`${source}: no data rows to plot`);
  }
  return rows;
}

/** Flat key=value sidecar written next to each sweep CSV. */
export function parseMeta(text: string): Map<string, string> {
  const out = new Map<string, string>();
  for (const line of text.split(/\r?\n/)) {
    const trimmed = line.trim();
    if (trimmed === "" || trimmed.startsWith("#")) continue;
    const eq = trimmed.indexOf("=");
    if (eq < 0) continue;
    out.set(trimmed.slice(0, eq), trimmed.slice(eq + 1));
  }
  return out;
}
