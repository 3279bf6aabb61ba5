import { mkdtemp, writeFile } from "node:fs/promises";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { OPTIMIZE_COLUMNS, SIMULATE_COLUMNS } from "../src/csv.js";

export const RIDGE = new URL("./fixtures/ridge", import.meta.url).pathname;
export const CONVEX = new URL("./fixtures/convex", import.meta.url).pathname;
export const MONOTONE = new URL("./fixtures/monotone", import.meta.url).pathname;

export async function tempDir(): Promise<string> {
  return mkdtemp(join(tmpdir(), "plots-test-"));
}

type Cells = Record<string, string>;

function csvText(columns: readonly string[], rows: Cells[]): string {
  const lines = [columns.join(",")];
  for (const row of rows) {
    lines.push(columns.map((c) => row[c] ?? "").join(","));
  }
  return lines.join("\n") + "\n";
}

// Minimal ok rows; tests override individual cells.
export function optimizeRow(over: Cells = {}): Cells {
  return {
    n: "5",
    policy: "GORA",
    status: "ok",
    b_star: "3",
    gamma_star: "7",
    tau_star: "0.25",
    p_s: "0.1",
    L_star: "12.5",
    f1: "0",
    f2: "0",
    end_of_cycle_penalty: "12.5",
    convexity: "positive definite",
    corollary2: "contains minimizer",
    continuous_b: "3.2",
    continuous_gamma: "6.8",
    boundary: "interior",
    d: "1",
    message: "",
    ...over,
  };
}

export function simulateRow(over: Cells = {}): Cells {
  return {
    n: "5",
    policy: "GORA",
    seed: "1",
    status: "ok",
    b: "3",
    gamma: "7",
    tau: "0.25",
    time_avg_penalty: "13.1",
    empirical_ps: "0.09",
    stderr: "0.4",
    renewals: "900",
    stationary: "true",
    d: "1",
    message: "",
    ...over,
  };
}

export async function writeOptimizeCsv(
  dir: string,
  rows: Cells[],
  columns: readonly string[] = OPTIMIZE_COLUMNS
): Promise<string> {
  const path = join(dir, "optimize.csv");
  await writeFile(path, csvText(columns, rows), { encoding: "utf-8" });
  return path;
}

export async function writeSimulateCsv(
  dir: string,
  rows: Cells[],
  columns: readonly string[] = SIMULATE_COLUMNS
): Promise<string> {
  const path = join(dir, "simulate.csv");
  await writeFile(path, csvText(columns, rows), { encoding: "utf-8" });
  return path;
}
