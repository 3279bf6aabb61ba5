#!/usr/bin/env node
import { parseArgs } from "node:util";
import { pathToFileURL } from "node:url";
import { DataError, SchemaError } from "./csv.js";
import { FIGURE_KINDS, FigureKind, render } from "./figures.js";

const USAGE = `usage: plots <figure-kind> --in <dir> --out <file>

figure kinds: ${FIGURE_KINDS.join(", ")}

<dir> is a sweep output directory (optimize.csv, simulate.csv,
manifest.json); <file> is the SVG to write.`;

export async function main(argv: string[]): Promise<number> {
  let kind: string;
  let input: string;
  let output: string;
  try {
    const parsed = parseArgs({
      args: argv,
      options: {
        in: { type: "string" },
        out: { type: "string" },
      },
      allowPositionals: true,
    });
    if (parsed.positionals.length !== 1) {
      throw new Error("expected exactly one figure kind");
    }
    kind = parsed.positionals[0]!;
    if (!(FIGURE_KINDS as readonly string[]).includes(kind)) {
      throw new Error(`unknown figure kind ${kind}`);
    }
    if (parsed.values.in === undefined) throw new Error("--in is required");
    if (parsed.values.out === undefined) throw new Error("--out is required");
    input = parsed.values.in;
    output = parsed.values.out;
  } catch (err) {
    console.error(`plots: ${(err as Error).message}`);
    console.error(USAGE);
    return 2;
  }
  try {
    await render({
      kind: kind as FigureKind,
      inputDir: input,
      outputPath: output,
    });
  } catch (err) {
    if (err instanceof SchemaError || err instanceof DataError) {
      console.error(`plots: ${err.message}`);
      return 1;
    }
    if ((err as NodeJS.ErrnoException).code === "ENOENT") {
      console.error(`plots: ${(err as NodeJS.ErrnoException).path}: not found`);
      return 1;
    }
    throw err;
  }
  return 0;
}

const invokedPath = process.argv[1];
if (invokedPath && import.meta.url === pathToFileURL(invokedPath).href) {
  process.exit(await main(process.argv.slice(2)));
}
