import { DataError } from "./csv.js";

// Hand-built SVG so the output is a pure function of the chart data: no
// DOM, no element ids, no timestamps. Rendering the same chart twice
// yields byte-identical files.

export interface Point {
  x: number;
  y: number;
}

export interface Series {
  label: string;
  points: Point[];
  color: string;
  dash?: string;
  markers?: boolean;
}

export interface Chart {
  title: string;
  subtitle?: string;
  xLabel: string;
  yLabel: string;
  series: Series[];
}

const WIDTH = 720;
const HEIGHT = 440;
const MARGIN = { top: 56, right: 184, bottom: 52, left: 76 };

export function escapeXml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

// Fixed-precision pixel coordinates keep the output stable under
// refactors that only reassociate float arithmetic.
function px(value: number): string {
  const rounded = Math.round(value * 100) / 100;
  return String(Object.is(rounded, -0) ? 0 : rounded);
}

function label(value: number): string {
  if (value === 0) return "0";
  const trimmed = Number(value.toPrecision(10));
  return String(trimmed);
}

// Tick positions at multiples of 1, 2, or 5 times a power of ten, the
// usual "nice numbers" rule.
export function ticks(lo: number, hi: number, count: number): number[] {
  if (!(hi > lo) || count <= 0) return [lo];
  const rawStep = (hi - lo) / count;
  const power = Math.pow(10, Math.floor(Math.log10(rawStep)));
  const ratio = rawStep / power;
  const factor = ratio >= 7 ? 10 : ratio >= 3 ? 5 : ratio >= 1.5 ? 2 : 1;
  const step = factor * power;
  const out: number[] = [];
  for (let i = Math.ceil(lo / step); i * step <= hi + step * 1e-9; i++) {
    out.push(Number((i * step).toPrecision(12)));
  }
  return out;
}

interface Scale {
  (value: number): number;
  domain: [number, number];
}

function linearScale(lo: number, hi: number, rlo: number, rhi: number): Scale {
  if (lo === hi) {
    const pad = Math.max(1, Math.abs(lo) * 0.1);
    lo -= pad;
    hi += pad;
  }
  const scale = ((value: number) =>
    rlo + ((value - lo) / (hi - lo)) * (rhi - rlo)) as Scale;
  scale.domain = [lo, hi];
  return scale;
}

function extent(values: number[]): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  return [lo, hi];
}

export function renderChart(chart: Chart): string {
  if (chart.series.length === 0) {
    throw new DataError(`${chart.title}: no series to plot`);
  }
  for (const s of chart.series) {
    if (s.points.length === 0) {
      throw new DataError(`${chart.title}: series "${s.label}" has no points`);
    }
    for (const p of s.points) {
      if (!Number.isFinite(p.x) || !Number.isFinite(p.y)) {
        throw new DataError(
          `${chart.title}: series "${s.label}" has a non-finite point`
        );
      }
    }
  }

  const xs = chart.series.flatMap((s) => s.points.map((p) => p.x));
  const ys = chart.series.flatMap((s) => s.points.map((p) => p.y));
  const [xlo, xhi] = extent(xs);
  let [ylo, yhi] = extent(ys);
  const ypad = (yhi - ylo) * 0.05;
  ylo -= ypad;
  yhi += ypad;
  const x = linearScale(xlo, xhi, MARGIN.left, WIDTH - MARGIN.right);
  const y = linearScale(ylo, yhi, HEIGHT - MARGIN.bottom, MARGIN.top);

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${WIDTH} ${HEIGHT}" ` +
      `width="${WIDTH}" height="${HEIGHT}" font-family="sans-serif" font-size="12">`
  );
  parts.push(`<title>${escapeXml(chart.title)}</title>`);
  parts.push(
    `<text x="${MARGIN.left}" y="22" font-size="16" font-weight="bold">` +
      `${escapeXml(chart.title)}</text>`
  );
  if (chart.subtitle) {
    parts.push(
      `<text x="${MARGIN.left}" y="40" fill="#555">` +
        `${escapeXml(chart.subtitle)}</text>`
    );
  }

  for (const t of ticks(y.domain[0], y.domain[1], 6)) {
    const yy = px(y(t));
    parts.push(
      `<line x1="${MARGIN.left}" y1="${yy}" x2="${WIDTH - MARGIN.right}" ` +
        `y2="${yy}" stroke="#ddd"/>`
    );
    parts.push(
      `<text x="${MARGIN.left - 8}" y="${yy}" dy="0.32em" text-anchor="end">` +
        `${label(t)}</text>`
    );
  }
  const baseline = px(HEIGHT - MARGIN.bottom);
  parts.push(
    `<line x1="${MARGIN.left}" y1="${baseline}" x2="${WIDTH - MARGIN.right}" ` +
      `y2="${baseline}" stroke="#000"/>`
  );
  for (const t of ticks(x.domain[0], x.domain[1], 8)) {
    const xx = px(x(t));
    parts.push(
      `<line x1="${xx}" y1="${baseline}" x2="${xx}" ` +
        `y2="${px(HEIGHT - MARGIN.bottom + 5)}" stroke="#000"/>`
    );
    parts.push(
      `<text x="${xx}" y="${px(HEIGHT - MARGIN.bottom + 18)}" ` +
        `text-anchor="middle">${label(t)}</text>`
    );
  }
  parts.push(
    `<text x="${px((MARGIN.left + WIDTH - MARGIN.right) / 2)}" ` +
      `y="${HEIGHT - 12}" text-anchor="middle">${escapeXml(chart.xLabel)}</text>`
  );
  const ymid = px((MARGIN.top + HEIGHT - MARGIN.bottom) / 2);
  parts.push(
    `<text x="18" y="${ymid}" text-anchor="middle" ` +
      `transform="rotate(-90 18 ${ymid})">${escapeXml(chart.yLabel)}</text>`
  );

  for (const s of chart.series) {
    const sorted = [...s.points].sort((a, b) => a.x - b.x);
    const path = sorted
      .map((p, i) => `${i === 0 ? "M" : "L"}${px(x(p.x))} ${px(y(p.y))}`)
      .join("");
    const dash = s.dash ? ` stroke-dasharray="${s.dash}"` : "";
    parts.push(
      `<path d="${path}" fill="none" stroke="${s.color}" ` +
        `stroke-width="1.8"${dash}/>`
    );
    if (s.markers) {
      for (const p of sorted) {
        parts.push(
          `<circle cx="${px(x(p.x))}" cy="${px(y(p.y))}" r="3" ` +
            `fill="${s.color}"/>`
        );
      }
    }
  }

  const lx = WIDTH - MARGIN.right + 16;
  chart.series.forEach((s, i) => {
    const ly = MARGIN.top + 8 + i * 20;
    const dash = s.dash ? ` stroke-dasharray="${s.dash}"` : "";
    parts.push(
      `<line x1="${lx}" y1="${ly}" x2="${lx + 22}" y2="${ly}" ` +
        `stroke="${s.color}" stroke-width="1.8"${dash}/>`
    );
    parts.push(
      `<text x="${lx + 28}" y="${ly}" dy="0.32em">${escapeXml(s.label)}</text>`
    );
  });

  parts.push("</svg>");
  return parts.join("\n") + "\n";
}
