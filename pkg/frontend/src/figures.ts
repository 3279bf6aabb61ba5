import { writeFile, mkdir } from "node:fs/promises";
import { dirname, join } from "node:path";
import {
  DataError,
  loadManifest,
  loadOptimizeCsv,
  loadSimulateCsv,
  OptimizeRow,
  SimulateRow,
} from "./csv.js";
import { Chart, renderChart, Series } from "./svg.js";

export const FIGURE_KINDS = [
  "bstar_vs_n",
  "penalty_vs_n",
  "theorem1_equality",
] as const;

export type FigureKind = (typeof FIGURE_KINDS)[number];

export interface FigureSpec {
  kind: FigureKind;
  inputDir: string;
  outputPath: string;
  xLabel?: string;
  yLabel?: string;
}

// Canonical policy order; unknown labels sort after, alphabetically.
const POLICY_RANK: Record<string, number> = { GORA: 0, TA: 1, SA: 2 };
const POLICY_COLOR: Record<string, number> = { GORA: 0, TA: 1, SA: 2 };
const PALETTE = ["#4269d0", "#efb118", "#ff725c", "#6cc5b0", "#3ca951"];

function policyOrder(a: string, b: string): number {
  const ra = POLICY_RANK[a] ?? PALETTE.length;
  const rb = POLICY_RANK[b] ?? PALETTE.length;
  return ra - rb || a.localeCompare(b);
}

function color(policy: string, index: number): string {
  return PALETTE[POLICY_COLOR[policy] ?? index % PALETTE.length]!;
}

function okRows<T extends { status: string }>(rows: T[], name: string): T[] {
  const ok = rows.filter((r) => r.status === "ok");
  if (ok.length === 0) {
    throw new DataError(`${name}: no rows with status ok`);
  }
  return ok;
}

function need(value: number | null, what: string, n: number): number {
  if (value === null) {
    throw new DataError(`row n=${n}: ${what} is empty on an ok row`);
  }
  return value;
}

function bstarVsN(rows: OptimizeRow[]): Chart {
  const ok = okRows(rows, "optimize.csv");
  const policies = [...new Set(ok.map((r) => r.policy))].sort(policyOrder);
  const series: Series[] = policies.map((policy, i) => ({
    label: policy,
    color: color(policy, i),
    markers: true,
    points: ok
      .filter((r) => r.policy === policy)
      .map((r) => ({ x: r.n, y: need(r.b_star, "b_star", r.n) })),
  }));
  return {
    title: "Optimal buffered age b* vs network size",
    xLabel: "network size n",
    yLabel: "b* (slots)",
    series,
  };
}

function penaltyVsN(rows: SimulateRow[]): Chart {
  const ok = okRows(rows, "simulate.csv");
  const policies = [...new Set(ok.map((r) => r.policy))].sort(policyOrder);
  const series: Series[] = policies.map((policy, i) => {
    const mine = ok.filter((r) => r.policy === policy);
    const byN = new Map<number, number[]>();
    for (const r of mine) {
      const penalty = need(r.time_avg_penalty, "time_avg_penalty", r.n);
      const bucket = byN.get(r.n);
      if (bucket) bucket.push(penalty);
      else byN.set(r.n, [penalty]);
    }
    const points = [...byN.entries()]
      .sort((a, b) => a[0] - b[0])
      .map(([n, values]) => ({
        x: n,
        y: values.reduce((acc, v) => acc + v, 0) / values.length,
      }));
    return { label: policy, color: color(policy, i), points };
  });
  return {
    title: "Simulated time-average penalty vs network size",
    subtitle: "seed-averaged",
    xLabel: "network size n",
    yLabel: "time-average penalty",
    series,
  };
}

// Overlays the three quantities the stationarity identities tie together
// at the continuous stationary point the f1/f2 columns describe: the
// window-start penalty h((b*+1)d) = end_of_cycle_penalty - f1, the mean
// penalty L = end_of_cycle_penalty - f2, and the end-of-cycle penalty
// itself. At interior optima f1 = f2 = 0, so the curves must coincide;
// an interior row with a visible gap is inconsistent and rendering
// refuses.
function theorem1Equality(rows: OptimizeRow[]): Chart {
  const ok = okRows(rows, "optimize.csv");
  const gora = ok.filter((r) => r.policy === "GORA");
  if (gora.length === 0) {
    throw new DataError("theorem1_equality: no ok GORA rows in optimize.csv");
  }
  const start: Series = {
    label: "window start h((b*+1)d)",
    color: PALETTE[1]!,
    dash: "7 4",
    points: [],
  };
  const mean: Series = {
    label: "mean penalty L",
    color: PALETTE[4]!,
    dash: "2 4",
    points: [],
  };
  const end: Series = {
    label: "end-of-cycle penalty",
    color: PALETTE[0]!,
    points: [],
  };
  for (const r of gora) {
    const f1 = need(r.f1, "f1", r.n);
    const f2 = need(r.f2, "f2", r.n);
    const endPenalty = need(r.end_of_cycle_penalty, "end_of_cycle_penalty", r.n);
    const scale = Math.max(1, Math.abs(endPenalty));
    if (r.boundary === "interior" && Math.max(Math.abs(f1), Math.abs(f2)) > 1e-6 * scale) {
      throw new DataError(
        `theorem1_equality: interior row n=${r.n} has |f1|=${Math.abs(f1)}, ` +
          `|f2|=${Math.abs(f2)}; the overlaid curves would not coincide`
      );
    }
    start.points.push({ x: r.n, y: endPenalty - f1 });
    mean.points.push({ x: r.n, y: endPenalty - f2 });
    end.points.push({ x: r.n, y: endPenalty });
  }
  return {
    title: "Stationarity check: window start, mean, end-of-cycle",
    subtitle: "GORA rows; curves coincide at interior optima",
    xLabel: "network size n",
    yLabel: "penalty",
    series: [end, start, mean],
  };
}

export async function buildFigure(
  kind: FigureKind,
  inputDir: string
): Promise<Chart> {
  const manifest = await loadManifest(inputDir);
  let chart: Chart;
  if (kind === "bstar_vs_n") {
    chart = bstarVsN(await loadOptimizeCsv(join(inputDir, "optimize.csv")));
  } else if (kind === "penalty_vs_n") {
    chart = penaltyVsN(await loadSimulateCsv(join(inputDir, "simulate.csv")));
  } else if (kind === "theorem1_equality") {
    chart = theorem1Equality(await loadOptimizeCsv(join(inputDir, "optimize.csv")));
  } else {
    throw new DataError(`unknown figure kind ${String(kind)}`);
  }
  if (manifest?.scenario?.name) {
    const scenario = `scenario ${manifest.scenario.name}`;
    chart.subtitle = chart.subtitle
      ? `${scenario}, ${chart.subtitle}`
      : scenario;
  }
  return chart;
}

// Reads the sweep directory, renders, and only then touches the output
// path, so a schema or data error never leaves a file behind.
export async function render(spec: FigureSpec): Promise<void> {
  const chart = await buildFigure(spec.kind, spec.inputDir);
  if (spec.xLabel !== undefined) chart.xLabel = spec.xLabel;
  if (spec.yLabel !== undefined) chart.yLabel = spec.yLabel;
  const svg = renderChart(chart);
  await mkdir(dirname(spec.outputPath), { recursive: true });
  await writeFile(spec.outputPath, svg, { encoding: "utf-8" });
}
