/** Least-squares slope of y against x (used on log-log data for rates). */
export function leastSquaresSlope(x: number[], y: number[]): number {
  if (x.length !== y.length || x.length < 2) {
    throw new Error("slope fit needs two same-length samples at least");
  }
  const n = x.length;
  const mx = x.reduce((a, b) => a + b, 0) / n;
  const my = y.reduce((a, b) => a + b, 0) / n;
  let sxx = 0;
  let sxy = 0;
  for (let i = 0; i < n; i++) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx === 0) {
    throw new Error("slope fit is degenerate: all x values coincide");
  }
  return sxy / sxx;
}

/** Fitted decay rate: slope of log(err) against log(dt). */
export function fittedRate(dts: number[], errs: number[]): number {
  return leastSquaresSlope(dts.map(Math.log), errs.map(Math.log));
}
