import { describe, expect, it } from "vitest";

import { decodeSparseGrid, encodeSparseGrid } from "../src/rle.js";
import type { SparseGrid } from "../src/types.js";

describe("sparse grid decoding", () => {
  it("decodes the documented example layout", () => {
    const payload: SparseGrid = {
      n_rows: 2,
      n_cols: 4,
      runs: [
        [1, [1, 2]],
        [4, [3, 4]],
        [7, [5]],
      ],
    };
    expect(Array.from(decodeSparseGrid(payload))).toEqual([0, 1, 2, 0, 3, 4, 0, 5]);
  });

  it("decodes an empty grid to all zeros", () => {
    const grid = decodeSparseGrid({ n_rows: 3, n_cols: 3, runs: [] });
    expect(grid.length).toBe(9);
    expect(grid.every((v) => v === 0)).toBe(true);
  });

  it("round-trips random sparse grids through the reference encoder", () => {
    for (let trial = 0; trial < 25; trial++) {
      const nRows = 1 + (trial % 7);
      const nCols = 1 + ((trial * 3) % 9);
      const grid = new Float32Array(nRows * nCols);
      for (let k = 0; k < grid.length; k++) {
        grid[k] = Math.random() > 0.6 ? Math.fround(Math.random() * 3) : 0;
      }
      const decoded = decodeSparseGrid(encodeSparseGrid(grid, nRows, nCols));
      expect(Array.from(decoded)).toEqual(Array.from(grid));
    }
  });

  it("adjacent nonzero cells share one run", () => {
    const grid = Float32Array.from([0, 1, 2, 0, 3, 4, 0, 5]);
    const payload = encodeSparseGrid(grid, 2, 4);
    expect(payload.runs.map((r) => r[0])).toEqual([1, 4, 7]);
  });

  it("rejects runs outside the grid", () => {
    expect(() =>
      decodeSparseGrid({ n_rows: 2, n_cols: 2, runs: [[3, [1, 2]]] }),
    ).toThrow(/outside/);
  });
});
