/** Canvas heatmap rendering for flood grids, overlays, and diff maps.
 *
 * The pixel math is kept in pure functions over typed arrays so it can
 * be tested without a DOM; only drawGrid touches the canvas. Grids
 * arrive with axis 0 = west-to-east index and axis 1 = south-to-north,
 * so a cell (i, j) maps to pixel x = i, y = nCols - 1 - j (north up,
 * coastline on the left).
 */

export type Rgba = [number, number, number, number];

export interface LegendBounds {
  min: number;
  max: number;
}

/** Water depth: transparent when dry, light-to-dark blue with depth. */
export function floodColormap(value: number, vmax: number): Rgba {
  if (value <= 0) return [0, 0, 0, 0];
  const t = vmax > 0 ? Math.min(value / vmax, 1) : 1;
  return [
    Math.round(180 - 160 * t),
    Math.round(220 - 140 * t),
    255,
    Math.round(90 + 165 * t),
  ];
}

/** Diverging map for differences: red = wetter, blue = drier, zero clear. */
export function divergingColormap(value: number, absMax: number): Rgba {
  if (value === 0 || absMax <= 0) return [0, 0, 0, 0];
  const t = Math.min(Math.abs(value) / absMax, 1);
  const alpha = Math.round(60 + 195 * t);
  return value > 0 ? [220, 60, 40, alpha] : [40, 90, 220, alpha];
}

/** Translucent overlay heat (uncertainty / attention): yellow-to-red. */
export function overlayColormap(value: number, vmax: number): Rgba {
  if (vmax <= 0) return [255, 200, 0, 60];
  const t = Math.min(Math.max(value / vmax, 0), 1);
  return [255, Math.round(220 - 180 * t), 0, Math.round(40 + 140 * t)];
}

export function legendBounds(grid: Float32Array): LegendBounds {
  let min = Infinity;
  let max = -Infinity;
  for (const v of grid) {
    if (v < min) min = v;
    if (v > max) max = v;
  }
  if (!isFinite(min)) return { min: 0, max: 0 };
  return { min, max };
}

/** Rasterize a grid into RGBA bytes (length 4 * nRows * nCols). */
export function gridToRgba(
  grid: Float32Array,
  nRows: number,
  nCols: number,
  colormap: (v: number) => Rgba,
): Uint8ClampedArray {
  const out = new Uint8ClampedArray(4 * nRows * nCols);
  for (let px = 0; px < nRows; px++) {
    for (let py = 0; py < nCols; py++) {
      const j = nCols - 1 - py; // north up
      const [r, g, b, a] = colormap(grid[px * nCols + j]);
      const o = 4 * (py * nRows + px);
      out[o] = r;
      out[o + 1] = g;
      out[o + 2] = b;
      out[o + 3] = a;
    }
  }
  return out;
}

/** Paint base pixels and an optional overlay onto a canvas, scaled. */
export function drawGrid(
  canvas: HTMLCanvasElement,
  base: Uint8ClampedArray,
  nRows: number,
  nCols: number,
  overlay?: Uint8ClampedArray,
): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) throw new Error("no 2d context");
  const image = new ImageData(new Uint8ClampedArray(base), nRows, nCols);
  const buffer = document.createElement("canvas");
  buffer.width = nRows;
  buffer.height = nCols;
  const bctx = buffer.getContext("2d")!;
  bctx.putImageData(image, 0, 0);
  if (overlay) {
    const over = document.createElement("canvas");
    over.width = nRows;
    over.height = nCols;
    over.getContext("2d")!.putImageData(new ImageData(new Uint8ClampedArray(overlay), nRows, nCols), 0, 0);
    bctx.drawImage(over, 0, 0);
  }
  ctx.imageSmoothingEnabled = false;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.drawImage(buffer, 0, 0, canvas.width, canvas.height);
}
