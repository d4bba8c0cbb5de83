#!/usr/bin/env node
/**
 * plot-trace <trace.csv> <out.svg>
 *
 * Reads a per-step solver trace and writes the energy / relaxation-factor
 * figure.
 */

import { writeFileSync } from "fs";
import { basename } from "path";
import { CsvFormatError, parseTrace, readText } from "./csv.js";
import { renderTrace } from "./trace.js";

export function main(argv: string[]): number {
  if (argv.length !== 2) {
    console.error("usage: plot-trace <trace.csv> <out.svg>");
    return 2;
  }
  const [csvPath, outPath] = argv;
  try {
    const rows = parseTrace(readText(csvPath));
    writeFileSync(outPath, renderTrace(rows, basename(csvPath)));
    console.log(`wrote ${outPath} (${rows.length} steps)`);
    return 0;
  } catch (err) {
    if (err instanceof CsvFormatError) {
      console.error(`${csvPath}: ${err.message}`);
      return 1;
    }
    throw err;
  }
}

if (process.argv[1] && process.argv[1].endsWith("plot-trace.js")) {
  process.exit(main(process.argv.slice(2)));
}
