import { readFile } from "node:fs/promises";
import { join } from "node:path";
import Papa from "papaparse";

// Column layouts this renderer understands, keyed by the schema tags the
// sweep manifest declares. Parsing is strict: unknown layouts, missing
// columns, and malformed cells are named errors, never guesses.
export const OPTIMIZE_SCHEMA = "gora.optimize/1";
export const SIMULATE_SCHEMA = "gora.simulate/1";

export const OPTIMIZE_COLUMNS = [
  "n", "policy", "status", "b_star", "gamma_star", "tau_star", "p_s",
  "L_star", "f1", "f2", "end_of_cycle_penalty", "convexity", "corollary2",
  "continuous_b", "continuous_gamma", "boundary", "d", "message",
] as const;

export const SIMULATE_COLUMNS = [
  "n", "policy", "seed", "status", "b", "gamma", "tau",
  "time_avg_penalty", "empirical_ps", "stderr", "renewals", "stationary",
  "d", "message",
] as const;

export class SchemaError extends Error {}

export class DataError extends Error {}

export interface OptimizeRow {
  n: number;
  policy: string;
  status: string;
  b_star: number | null;
  gamma_star: number | null;
  tau_star: number | null;
  p_s: number | null;
  L_star: number | null;
  f1: number | null;
  f2: number | null;
  end_of_cycle_penalty: number | null;
  convexity: string;
  corollary2: string;
  continuous_b: number | null;
  continuous_gamma: number | null;
  boundary: string;
  d: number | null;
  message: string;
}

export interface SimulateRow {
  n: number;
  policy: string;
  seed: number;
  status: string;
  b: number | null;
  gamma: number | null;
  tau: number | null;
  time_avg_penalty: number | null;
  empirical_ps: number | null;
  stderr: number | null;
  renewals: number | null;
  stationary: "true" | "false" | "unknown" | "";
  d: number | null;
  message: string;
}

export interface Manifest {
  tool: string;
  version: string;
  schemas: Record<string, string>;
  scenario: { name: string } & Record<string, unknown>;
  effective_seeds: number[];
  seed_override: number | null;
}

interface Table {
  name: string;
  header: string[];
  cells: string[][];
  column: Map<string, number>;
}

async function readTable(path: string, required: readonly string[]): Promise<Table> {
  const name = path;
  const text = await readFile(path, { encoding: "utf-8" });
  const parsed = Papa.parse<string[]>(text, { skipEmptyLines: true });
  if (parsed.data.length === 0) {
    throw new SchemaError(`${name}: empty CSV`);
  }
  const fatal = parsed.errors.find((e) => e.type !== "FieldMismatch");
  if (fatal) {
    throw new DataError(`${name}: ${fatal.message}`);
  }
  const header = parsed.data[0]!;
  const missing = required.filter((c) => !header.includes(c));
  if (missing.length > 0) {
    throw new SchemaError(`${name}: missing column(s) ${missing.join(", ")}`);
  }
  const duplicated = required.filter((c) => header.indexOf(c) !== header.lastIndexOf(c));
  if (duplicated.length > 0) {
    throw new SchemaError(`${name}: duplicated column(s) ${duplicated.join(", ")}`);
  }
  const cells = parsed.data.slice(1);
  if (cells.length === 0) {
    throw new DataError(`${name}: no data rows`);
  }
  cells.forEach((row, i) => {
    if (row.length !== header.length) {
      throw new DataError(
        `${name} line ${i + 2}: expected ${header.length} cells, got ${row.length}`
      );
    }
  });
  const column = new Map(header.map((c, i) => [c, i]));
  return { name, header, cells, column };
}

// One cursor per data row; cells come back typed or the error names the
// file, line, and column.
class Row {
  constructor(private table: Table, private index: number) {}

  private cell(column: string): string {
    return this.table.cells[this.index]![this.table.column.get(column)!]!;
  }

  private fail(column: string, want: string): never {
    const got = this.cell(column);
    throw new DataError(
      `${this.table.name} line ${this.index + 2}: column ${column}: ` +
        `cannot parse "${got}" as ${want}`
    );
  }

  text(column: string): string {
    return this.cell(column);
  }

  float(column: string): number | null {
    const raw = this.cell(column);
    if (raw === "") return null;
    if (raw === "nan") return NaN;
    if (raw === "inf") return Infinity;
    if (raw === "-inf") return -Infinity;
    const x = Number(raw);
    if (Number.isNaN(x)) this.fail(column, "a number");
    return x;
  }

  int(column: string): number {
    const x = this.float(column);
    if (x === null || !Number.isInteger(x)) this.fail(column, "an integer");
    return x;
  }

  flag(column: string): "true" | "false" | "unknown" | "" {
    const raw = this.cell(column);
    if (raw === "true" || raw === "false" || raw === "unknown" || raw === "") {
      return raw;
    }
    this.fail(column, "true/false/unknown");
  }
}

export async function loadOptimizeCsv(path: string): Promise<OptimizeRow[]> {
  const table = await readTable(path, OPTIMIZE_COLUMNS);
  return table.cells.map((_, i) => {
    const row = new Row(table, i);
    return {
      n: row.int("n"),
      policy: row.text("policy"),
      status: row.text("status"),
      b_star: row.float("b_star"),
      gamma_star: row.float("gamma_star"),
      tau_star: row.float("tau_star"),
      p_s: row.float("p_s"),
      L_star: row.float("L_star"),
      f1: row.float("f1"),
      f2: row.float("f2"),
      end_of_cycle_penalty: row.float("end_of_cycle_penalty"),
      convexity: row.text("convexity"),
      corollary2: row.text("corollary2"),
      continuous_b: row.float("continuous_b"),
      continuous_gamma: row.float("continuous_gamma"),
      boundary: row.text("boundary"),
      d: row.float("d"),
      message: row.text("message"),
    };
  });
}

export async function loadSimulateCsv(path: string): Promise<SimulateRow[]> {
  const table = await readTable(path, SIMULATE_COLUMNS);
  return table.cells.map((_, i) => {
    const row = new Row(table, i);
    return {
      n: row.int("n"),
      policy: row.text("policy"),
      seed: row.int("seed"),
      status: row.text("status"),
      b: row.float("b"),
      gamma: row.float("gamma"),
      tau: row.float("tau"),
      time_avg_penalty: row.float("time_avg_penalty"),
      empirical_ps: row.float("empirical_ps"),
      stderr: row.float("stderr"),
      renewals: row.float("renewals"),
      stationary: row.flag("stationary"),
      d: row.float("d"),
      message: row.text("message"),
    };
  });
}

// The manifest is optional (bare CSV directories are accepted) but when
// present its declared schemas must be ones this renderer understands.
export async function loadManifest(dir: string): Promise<Manifest | null> {
  const path = join(dir, "manifest.json");
  let text: string;
  try {
    text = await readFile(path, { encoding: "utf-8" });
  } catch (err) {
    if ((err as NodeJS.ErrnoException).code === "ENOENT") return null;
    throw err;
  }
  let manifest: Manifest;
  try {
    manifest = JSON.parse(text) as Manifest;
  } catch (err) {
    throw new DataError(`${path}: ${(err as Error).message}`);
  }
  const supported: Record<string, string> = {
    "optimize.csv": OPTIMIZE_SCHEMA,
    "simulate.csv": SIMULATE_SCHEMA,
  };
  for (const [key, want] of Object.entries(supported)) {
    const got = manifest.schemas?.[key];
    if (got !== undefined && got !== want) {
      throw new SchemaError(`${path}: schema ${key} is ${got}, expected ${want}`);
    }
  }
  return manifest;
}
