import { readFile, stat, writeFile } from "node:fs/promises";
import { join } from "node:path";
import { afterEach, describe, expect, it, vi } from "vitest";
import { main } from "../src/cli.js";
import { RIDGE, tempDir } from "./helpers.js";

function captureStderr(): string[] {
  const lines: string[] = [];
  vi.spyOn(console, "error").mockImplementation((msg: string) => {
    lines.push(String(msg));
  });
  return lines;
}

afterEach(() => {
  vi.restoreAllMocks();
});

describe("main", () => {
  it("renders a figure and exits 0", async () => {
    const dir = await tempDir();
    const out = join(dir, "bstar.svg");
    const code = await main(["bstar_vs_n", "--in", RIDGE, "--out", out]);
    expect(code).toBe(0);
    const svg = await readFile(out, "utf-8");
    expect(svg).toContain("Optimal buffered age b*");
  });

  it("produces byte-identical output across runs", async () => {
    const dir = await tempDir();
    const a = join(dir, "a.svg");
    const b = join(dir, "b.svg");
    expect(await main(["theorem1_equality", "--in", RIDGE, "--out", a])).toBe(0);
    expect(await main(["theorem1_equality", "--in", RIDGE, "--out", b])).toBe(0);
    expect(await readFile(a, "utf-8")).toBe(await readFile(b, "utf-8"));
  });

  it("matches the committed golden figures", async () => {
    const dir = await tempDir();
    for (const [kind, golden] of [
      ["bstar_vs_n", "bstar_ridge.svg"],
      ["theorem1_equality", "theorem1_ridge.svg"],
    ] as const) {
      const out = join(dir, golden);
      expect(await main([kind, "--in", RIDGE, "--out", out])).toBe(0);
      const want = await readFile(
        new URL(`./golden/${golden}`, import.meta.url),
        "utf-8"
      );
      expect(await readFile(out, "utf-8")).toBe(want);
    }
  });

  it("rejects usage errors with exit 2", async () => {
    const lines = captureStderr();
    expect(await main(["sideways_bar", "--in", "x", "--out", "y"])).toBe(2);
    expect(await main(["bstar_vs_n", "--out", "y"])).toBe(2);
    expect(await main(["bstar_vs_n", "--in", "x"])).toBe(2);
    expect(await main([])).toBe(2);
    expect(await main(["bstar_vs_n", "extra", "--in", "x", "--out", "y"])).toBe(2);
    expect(await main(["bstar_vs_n", "--in", "x", "--out", "y", "--bogus"])).toBe(2);
    expect(lines.join("\n")).toContain("unknown figure kind sideways_bar");
    expect(lines.join("\n")).toContain("usage: plots");
  });

  it("exits 1 when the input directory is missing", async () => {
    const lines = captureStderr();
    const dir = await tempDir();
    const out = join(dir, "out.svg");
    const code = await main([
      "bstar_vs_n",
      "--in", join(dir, "nowhere"),
      "--out", out,
    ]);
    expect(code).toBe(1);
    expect(lines.join("\n")).toContain("not found");
    await expect(stat(out)).rejects.toThrow();
  });

  it("exits 1 on an empty CSV and writes no file", async () => {
    const lines = captureStderr();
    const dir = await tempDir();
    await writeFile(join(dir, "optimize.csv"), "");
    const out = join(dir, "out.svg");
    const code = await main(["bstar_vs_n", "--in", dir, "--out", out]);
    expect(code).toBe(1);
    expect(lines.join("\n")).toContain("empty CSV");
    await expect(stat(out)).rejects.toThrow();
  });

  it("names missing columns on a foreign CSV", async () => {
    const lines = captureStderr();
    const dir = await tempDir();
    await writeFile(join(dir, "optimize.csv"), "a,b\n1,2\n");
    const code = await main([
      "bstar_vs_n",
      "--in", dir,
      "--out", join(dir, "out.svg"),
    ]);
    expect(code).toBe(1);
    expect(lines.join("\n")).toContain("missing column(s) n, policy");
  });
});
