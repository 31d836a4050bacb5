/**
 * CSV reading for the engine's artifacts: `#` comment lines, one header row,
 * numeric cells. Schema validation reports the first offending column by
 * name so a caller can exit non-zero with a useful message.
 */

import * as fs from "node:fs";

export interface Table {
  columns: string[];
  rows: number[][];
  comments: string[];
}

export class SchemaError extends Error {
  constructor(public readonly column: string, message: string) {
    super(message);
  }
}

export function readCsv(path: string): Table {
  const text = fs.readFileSync(path, "utf8");
  const comments: string[] = [];
  const dataLines: string[] = [];
  for (const line of text.split(/\r?\n/)) {
    const trimmed = line.trim();
    if (!trimmed) continue;
    if (trimmed.startsWith("#")) {
      comments.push(trimmed.slice(1).trim());
    } else {
      dataLines.push(trimmed);
    }
  }
  if (dataLines.length === 0) {
    throw new Error(`${path}: no header row`);
  }
  const columns = dataLines[0].split(",").map((c) => c.trim());
  const rows = dataLines.slice(1).map((line, i) => {
    const cells = line.split(",");
    if (cells.length !== columns.length) {
      throw new Error(`${path}: row ${i + 1} has ${cells.length} cells, expected ${columns.length}`);
    }
    return cells.map((c) => Number(c));
  });
  return { columns, rows, comments };
}

/** Require exactly the named columns (any order); throws SchemaError. */
export function validateSchema(table: Table, expected: string[], label: string): void {
  for (const col of expected) {
    if (!table.columns.includes(col)) {
      throw new SchemaError(col, `${label}: missing column '${col}'`);
    }
  }
  for (const col of table.columns) {
    if (!expected.includes(col)) {
      throw new SchemaError(col, `${label}: unexpected column '${col}'`);
    }
  }
}

export function column(table: Table, name: string): number[] {
  const idx = table.columns.indexOf(name);
  if (idx < 0) {
    throw new SchemaError(name, `missing column '${name}'`);
  }
  return table.rows.map((r) => r[idx]);
}

export const DIAGNOSTICS_SCHEMA = [
  "level",
  "log2_var_Pl",
  "log2_var_diff",
  "log2_mean_Pl",
  "log2_mean_diff",
  "cost",
];

export const COST_SCHEMA = ["eps", "levels", "total_cost", "mc_proxy_cost", "eps2_cost"];

export const ALLOCATIONS_SCHEMA = ["eps", "level", "n_paths"];
