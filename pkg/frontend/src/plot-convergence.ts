#!/usr/bin/env node
/**
 * plot-convergence <convergence.csv> <out.svg>
 *
 * Reads a solver convergence table and writes a log-log error figure with
 * fitted slopes and order guide lines.
 */

import { writeFileSync } from "fs";
import { basename } from "path";
import { CsvFormatError, parseConvergence, readText } from "./csv.js";
import { renderConvergence } from "./convergence.js";

export function main(argv: string[]): number {
  if (argv.length !== 2) {
    console.error("usage: plot-convergence <convergence.csv> <out.svg>");
    return 2;
  }
  const [csvPath, outPath] = argv;
  try {
    const rows = parseConvergence(readText(csvPath));
    const { svg, slopes } = renderConvergence(rows, basename(csvPath));
    writeFileSync(outPath, svg);
    console.log(
      `wrote ${outPath}; slopes: u=${slopes.u.toFixed(3)} ` +
        `phi=${slopes.phi.toFixed(3)} p=${slopes.p.toFixed(3)}`
    );
    return 0;
  } catch (err) {
    if (err instanceof CsvFormatError) {
      console.error(`${csvPath}: ${err.message}`);
      return 1;
    }
    throw err;
  }
}

if (process.argv[1] && process.argv[1].endsWith("plot-convergence.js")) {
  process.exit(main(process.argv.slice(2)));
}
