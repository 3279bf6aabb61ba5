import { describe, expect, it } from "vitest";
import { DataError } from "../src/csv.js";
import { Chart, escapeXml, renderChart, ticks } from "../src/svg.js";

function chart(over: Partial<Chart> = {}): Chart {
  return {
    title: "demo chart",
    xLabel: "x axis",
    yLabel: "y axis",
    series: [
      {
        label: "alpha",
        color: "#4269d0",
        markers: true,
        points: [
          { x: 1, y: 2 },
          { x: 2, y: 5 },
          { x: 3, y: 3 },
        ],
      },
      {
        label: "beta",
        color: "#efb118",
        dash: "7 4",
        points: [
          { x: 1, y: 4 },
          { x: 3, y: 1 },
        ],
      },
    ],
    ...over,
  };
}

describe("renderChart", () => {
  it("is deterministic", () => {
    expect(renderChart(chart())).toBe(renderChart(chart()));
  });

  it("builds a standalone svg with legend, axes, and markers", () => {
    const svg = renderChart(chart());
    expect(svg.startsWith('<svg xmlns="http://www.w3.org/2000/svg"')).toBe(true);
    expect(svg.endsWith("</svg>\n")).toBe(true);
    expect(svg).toContain("demo chart");
    expect(svg).toContain("x axis");
    expect(svg).toContain("y axis");
    expect(svg).toContain(">alpha</text>");
    expect(svg).toContain(">beta</text>");
    expect((svg.match(/<circle /g) ?? []).length).toBe(3);
    expect(svg).toContain('stroke-dasharray="7 4"');
    expect(svg).not.toContain("NaN");
  });

  it("escapes markup in titles and labels", () => {
    const svg = renderChart(chart({ title: "a < b & c" }));
    expect(svg).toContain("a &lt; b &amp; c");
    expect(svg).not.toContain("a < b");
  });

  it("sorts points by x before drawing the line", () => {
    const shuffled = chart({
      series: [
        {
          label: "alpha",
          color: "#4269d0",
          points: [
            { x: 3, y: 3 },
            { x: 1, y: 2 },
            { x: 2, y: 5 },
          ],
        },
      ],
    });
    const ordered = chart({
      series: [
        {
          label: "alpha",
          color: "#4269d0",
          points: [
            { x: 1, y: 2 },
            { x: 2, y: 5 },
            { x: 3, y: 3 },
          ],
        },
      ],
    });
    expect(renderChart(shuffled)).toBe(renderChart(ordered));
  });

  it("renders flat and single-point series without degenerate output", () => {
    const flat = renderChart(
      chart({
        series: [
          {
            label: "flat",
            color: "#000",
            points: [
              { x: 3, y: 0 },
              { x: 6, y: 0 },
              { x: 9, y: 0 },
            ],
          },
        ],
      })
    );
    expect(flat).not.toContain("NaN");
    const single = renderChart(
      chart({
        series: [{ label: "one", color: "#000", points: [{ x: 5, y: 7 }] }],
      })
    );
    expect(single).not.toContain("NaN");
  });

  it("refuses non-finite points, empty series, and empty charts", () => {
    expect(() =>
      renderChart(
        chart({
          series: [{ label: "bad", color: "#000", points: [{ x: 1, y: NaN }] }],
        })
      )
    ).toThrow(DataError);
    expect(() =>
      renderChart(chart({ series: [{ label: "none", color: "#000", points: [] }] }))
    ).toThrow(/has no points/);
    expect(() => renderChart(chart({ series: [] }))).toThrow(/no series/);
  });

  it("contains no timestamps or random identifiers", () => {
    const svg = renderChart(chart());
    expect(svg).not.toMatch(/\d{4}-\d{2}-\d{2}/);
    expect(svg).not.toMatch(/\bid=/);
  });
});

describe("ticks", () => {
  it("picks multiples of 1, 2, or 5 inside the domain", () => {
    expect(ticks(0, 10, 5)).toEqual([0, 2, 4, 6, 8, 10]);
    expect(ticks(5, 12, 8)).toEqual([5, 6, 7, 8, 9, 10, 11, 12]);
    expect(ticks(-1, 1, 6)).toEqual([-1, -0.5, 0, 0.5, 1]);
  });

  it("handles fractional and large domains without float dust", () => {
    expect(ticks(0, 0.3, 6)).toEqual([0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3]);
    expect(ticks(0, 0.7, 6)).toEqual([0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7]);
    expect(ticks(0, 5e7, 6)).toEqual([0, 1e7, 2e7, 3e7, 4e7, 5e7]);
  });

  it("degrades to the low endpoint on an empty domain", () => {
    expect(ticks(2, 2, 5)).toEqual([2]);
  });
});

describe("escapeXml", () => {
  it("escapes the four reserved characters", () => {
    expect(escapeXml(`<a & "b">`)).toBe("&lt;a &amp; &quot;b&quot;&gt;");
  });
});
