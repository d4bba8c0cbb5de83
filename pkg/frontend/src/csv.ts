/**
 * Parsers for the solver's delimited outputs.
 *
 * Both formats are plain CSV with optional leading `#` comment lines; the
 * column layouts are fixed and validated so a stale or truncated file fails
 * loudly with the offending line number.
 */

import { readFileSync } from "fs";

export interface ConvergenceRow {
  h: number;
  dt: number;
  err_u: number;
  err_phi: number;
  err_p: number;
}

export interface TraceRow {
  step: number;
  t: number;
  E: number;
  xi: number;
  I: number;
  div_residual: number;
  mass: number;
  flags: string;
}

export const CONVERGENCE_HEADER = "h,dt,err_u,err_phi,err_p";
export const TRACE_HEADER = "step,t,E,xi,I,div_residual,mass,flags";

export class CsvFormatError extends Error {}

/** Split into trimmed lines, keeping 1-based line numbers, dropping comments. */
function dataLines(text: string): Array<{ line: string; no: number }> {
  return text
    .split(/\r?\n/)
    .map((line, i) => ({ line: line.trim(), no: i + 1 }))
    .filter(({ line }) => line.length > 0 && !line.startsWith("#"));
}

function toNumber(cell: string, no: number, column: string): number {
  const v = Number(cell);
  if (cell === "" || !Number.isFinite(v)) {
    throw new CsvFormatError(
      `line ${no}: column '${column}' is not a finite number: '${cell}'`
    );
  }
  return v;
}

export function parseConvergence(text: string): ConvergenceRow[] {
  const lines = dataLines(text);
  if (lines.length === 0) {
    throw new CsvFormatError("empty file: expected a convergence table");
  }
  if (lines[0].line !== CONVERGENCE_HEADER) {
    throw new CsvFormatError(
      `line ${lines[0].no}: expected header '${CONVERGENCE_HEADER}', ` +
        `got '${lines[0].line}'`
    );
  }
  const cols = CONVERGENCE_HEADER.split(",");
  const rows: ConvergenceRow[] = [];
  for (const { line, no } of lines.slice(1)) {
    const cells = line.split(",");
    if (cells.length !== cols.length) {
      throw new CsvFormatError(
        `line ${no}: expected ${cols.length} columns, got ${cells.length}`
      );
    }
    rows.push({
      h: toNumber(cells[0], no, "h"),
      dt: toNumber(cells[1], no, "dt"),
      err_u: toNumber(cells[2], no, "err_u"),
      err_phi: toNumber(cells[3], no, "err_phi"),
      err_p: toNumber(cells[4], no, "err_p"),
    });
  }
  if (rows.length < 2) {
    throw new CsvFormatError(
      `need at least 2 data rows to fit a rate, got ${rows.length}`
    );
  }
  return rows;
}

export function parseTrace(text: string): TraceRow[] {
  const lines = dataLines(text);
  if (lines.length === 0) {
    throw new CsvFormatError("empty file: expected a trace");
  }
  if (lines[0].line !== TRACE_HEADER) {
    throw new CsvFormatError(
      `line ${lines[0].no}: expected header '${TRACE_HEADER}', ` +
        `got '${lines[0].line}'`
    );
  }
  const rows: TraceRow[] = [];
  for (const { line, no } of lines.slice(1)) {
    const cells = line.split(",");
    if (cells.length !== 8) {
      throw new CsvFormatError(`line ${no}: expected 8 columns, got ${cells.length}`);
    }
    rows.push({
      step: toNumber(cells[0], no, "step"),
      t: toNumber(cells[1], no, "t"),
      E: toNumber(cells[2], no, "E"),
      xi: toNumber(cells[3], no, "xi"),
      I: toNumber(cells[4], no, "I"),
      div_residual: toNumber(cells[5], no, "div_residual"),
      mass: toNumber(cells[6], no, "mass"),
      flags: cells[7],
    });
  }
  if (rows.length === 0) {
    throw new CsvFormatError("trace has a header but no steps");
  }
  return rows;
}

export function readText(path: string): string {
  return readFileSync(path, "utf-8");
}
