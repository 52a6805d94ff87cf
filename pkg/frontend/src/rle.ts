/** Decoder for the service's sparse run-length grid payloads.
 *
 * The format is `{n_rows, n_cols, runs: [[start, [v, ...]], ...]}` where
 * `start` is the row-major flat index of the first cell of a run of
 * consecutive nonzero values; every cell not covered by a run is zero.
 * This mirrors the server encoder byte for byte: runs are ordered,
 * non-overlapping, and never touch.
 */

import type { SparseGrid } from "./types.js";

export function decodeSparseGrid(payload: SparseGrid): Float32Array {
  const { n_rows, n_cols, runs } = payload;
  if (!Number.isInteger(n_rows) || !Number.isInteger(n_cols) || n_rows < 0 || n_cols < 0) {
    throw new Error(`bad grid shape ${n_rows}x${n_cols}`);
  }
  const flat = new Float32Array(n_rows * n_cols);
  for (const [start, values] of runs) {
    if (start < 0 || start + values.length > flat.length) {
      throw new Error(`run [${start}, +${values.length}] falls outside the grid`);
    }
    flat.set(values, start);
  }
  return flat;
}

/** Test helper / reference implementation of the matching encoder. */
export function encodeSparseGrid(grid: Float32Array, nRows: number, nCols: number): SparseGrid {
  if (grid.length !== nRows * nCols) {
    throw new Error(`grid length ${grid.length} != ${nRows}x${nCols}`);
  }
  const runs: [number, number[]][] = [];
  let run: number[] | null = null;
  let runStart = 0;
  grid.forEach((v, k) => {
    if (v !== 0) {
      if (run === null) {
        run = [];
        runStart = k;
      }
      run.push(v);
    } else if (run !== null) {
      runs.push([runStart, run]);
      run = null;
    }
  });
  if (run !== null) runs.push([runStart, run]);
  return { n_rows: nRows, n_cols: nCols, runs };
}
