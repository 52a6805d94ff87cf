/** Side-by-side scenario comparison: cell-wise difference of two
 * predictions plus deltas of their summary statistics. */

import { decodeSparseGrid } from "./rle.js";
import type { PredictResponse } from "./types.js";

export interface DiffView {
  /** b - a, cell-wise. */
  diff: Float32Array;
  nRows: number;
  nCols: number;
  /** Largest absolute difference (diverging-colormap scale). */
  absMax: number;
  floodedCellsDelta: number;
  maxPwlDelta: number;
  meanPwlDelta: number;
}

export function compareResponses(a: PredictResponse, b: PredictResponse): DiffView {
  const { n_rows: ar, n_cols: ac } = a.cells;
  const { n_rows: br, n_cols: bc } = b.cells;
  if (ar !== br || ac !== bc) {
    throw new Error(`grid size mismatch: ${ar}x${ac} vs ${br}x${bc}`);
  }
  const ga = decodeSparseGrid(a.cells);
  const gb = decodeSparseGrid(b.cells);
  const diff = new Float32Array(ga.length);
  let absMax = 0;
  for (let k = 0; k < ga.length; k++) {
    diff[k] = gb[k] - ga[k];
    absMax = Math.max(absMax, Math.abs(diff[k]));
  }
  return {
    diff,
    nRows: ar,
    nCols: ac,
    absMax,
    floodedCellsDelta: b.summary.flooded_cells - a.summary.flooded_cells,
    maxPwlDelta: b.summary.max_pwl - a.summary.max_pwl,
    meanPwlDelta: b.summary.mean_pwl - a.summary.mean_pwl,
  };
}
