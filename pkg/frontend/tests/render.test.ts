import { describe, expect, it } from "vitest";

import {
  divergingColormap,
  floodColormap,
  gridToRgba,
  legendBounds,
  overlayColormap,
} from "../src/render.js";

describe("colormaps", () => {
  it("dry cells are fully transparent", () => {
    expect(floodColormap(0, 2)[3]).toBe(0);
    expect(floodColormap(-1, 2)[3]).toBe(0);
  });

  it("all channels stay within byte range across the scale", () => {
    for (const v of [0, 0.1, 0.5, 1, 2, 5]) {
      for (const c of [
        floodColormap(v, 2),
        divergingColormap(v - 1, 2),
        overlayColormap(v, 2),
      ]) {
        c.forEach((ch) => {
          expect(ch).toBeGreaterThanOrEqual(0);
          expect(ch).toBeLessThanOrEqual(255);
          expect(Number.isInteger(ch)).toBe(true);
        });
      }
    }
  });

  it("diverging map separates sign by hue and hides zero", () => {
    expect(divergingColormap(0, 1)[3]).toBe(0);
    const wetter = divergingColormap(0.5, 1);
    const drier = divergingColormap(-0.5, 1);
    expect(wetter[0]).toBeGreaterThan(wetter[2]); // red-ish
    expect(drier[2]).toBeGreaterThan(drier[0]); // blue-ish
  });

  it("uniform overlay values give a uniform layer", () => {
    // a zero-std grid must render as one flat translucent tone
    const a = overlayColormap(0, 0);
    const b = overlayColormap(0, 0);
    expect(a).toEqual(b);
    const grid = new Float32Array(16).fill(0.7);
    const pixels = gridToRgba(grid, 4, 4, (v) => overlayColormap(v, 0.7));
    for (let k = 4; k < pixels.length; k += 4) {
      expect(pixels[k]).toBe(pixels[0]);
      expect(pixels[k + 3]).toBe(pixels[3]);
    }
  });
});

describe("rasterization", () => {
  it("produces 4 bytes per cell", () => {
    const grid = new Float32Array(12);
    expect(gridToRgba(grid, 3, 4, (v) => floodColormap(v, 1)).length).toBe(48);
  });

  it("maps grid axes north-up with the coast on the left", () => {
    // single wet cell at grid (i=0, j=nCols-1): west edge, northernmost
    const nRows = 3;
    const nCols = 3;
    const grid = new Float32Array(nRows * nCols);
    grid[0 * nCols + (nCols - 1)] = 1;
    const pixels = gridToRgba(grid, nRows, nCols, (v) => floodColormap(v, 1));
    // expect the top-left pixel (py=0, px=0) to be the wet one
    expect(pixels[3]).toBeGreaterThan(0);
    expect(pixels.slice(4).every((_, idx) => idx % 4 !== 3 || pixels[4 + idx] === 0)).toBe(true);
  });

  it("base pixels are unaffected by overlay rendering", () => {
    // overlays composite on top; the base raster itself never changes
    const grid = Float32Array.from([0, 1, 2, 0]);
    const before = gridToRgba(grid, 2, 2, (v) => floodColormap(v, 2));
    const overlayGrid = Float32Array.from([9, 9, 9, 9]);
    gridToRgba(overlayGrid, 2, 2, (v) => overlayColormap(v, 9));
    const after = gridToRgba(grid, 2, 2, (v) => floodColormap(v, 2));
    expect(Array.from(after)).toEqual(Array.from(before));
  });
});

describe("legend bounds", () => {
  it("uses the response's own min and max", () => {
    const grid = Float32Array.from([0.25, 2, 0.5, 1]);
    expect(legendBounds(grid)).toEqual({ min: 0.25, max: 2 });
  });

  it("empty grid collapses to zero", () => {
    expect(legendBounds(new Float32Array(0))).toEqual({ min: 0, max: 0 });
  });
});
