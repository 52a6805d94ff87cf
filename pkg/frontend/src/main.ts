/** Scenario explorer: wire the pure state machine to the DOM.
 *
 * Planner loop: toggle OLU protections and the SLR depth, see the
 * predicted inundation map and summary stats, optionally with the
 * ensemble-uncertainty or attention overlay, and hold any scenario in
 * the comparison slot for a cell-wise difference view.
 */

import { ScenarioClient } from "./api.js";
import { compareResponses } from "./compare.js";
import { decodeSparseGrid } from "./rle.js";
import {
  divergingColormap,
  drawGrid,
  floodColormap,
  gridToRgba,
  legendBounds,
  overlayColormap,
} from "./render.js";
import {
  ScenarioState,
  acceptResponse,
  beginRequest,
  bitsString,
  holdComparison,
  clearComparison,
  initialState,
  overlayAvailable,
  rejectRequest,
  setOverlay,
  setSlr,
  toggleBit,
  withRegion,
} from "./state.js";
import type { OverlayMode } from "./state.js";

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
};

let state: ScenarioState = initialState();
let client: ScenarioClient | null = null;

function setState(next: ScenarioState): void {
  state = next;
  render();
}

async function connect(): Promise<void> {
  const base = ($("server-url") as HTMLInputElement).value.replace(/\/$/, "");
  client = new ScenarioClient(base);
  try {
    const region = await client.region();
    setState(withRegion(state, region));
    await refresh();
  } catch (err) {
    setState({ ...state, error: `cannot reach service: ${(err as Error).message}` });
  }
}

/** Issue a predict for the current toggles; stale replies are dropped. */
async function refresh(): Promise<void> {
  if (!client || !state.region) return;
  const { state: started, seq } = beginRequest(state);
  const bits = started.bits.slice();
  setState(started);
  try {
    const response = await client.predict({
      bits: bits.join(""),
      slr_m: started.slr,
      uncertainty: state.overlay === "uncertainty" || undefined,
      gradcam: state.overlay === "gradcam" || undefined,
    });
    setState(acceptResponse(state, seq, bits, response));
  } catch (err) {
    setState(rejectRequest(state, seq, (err as Error).message));
  }
}

function onToggle(index: number): void {
  setState(toggleBit(state, index));
  void refresh();
}

function onSlr(value: number): void {
  setState(setSlr(state, value));
  void refresh();
}

function onOverlay(mode: OverlayMode): void {
  const next = setOverlay(state, mode);
  if (next === state && mode !== "none") {
    // overlay payload not in the last response; re-request with the flag
    setState({ ...state, overlay: mode });
  } else {
    setState(next);
  }
  void refresh();
}

function render(): void {
  $("banner").textContent = state.error ?? "";
  $("banner").style.display = state.error ? "block" : "none";
  $("status").textContent = state.pending ? "predicting..." : "";

  const region = state.region;
  if (!region) return;
  $("region-name").textContent =
    `${region.name} - ${region.olu_count} OLUs - model ${region.model_version}`;

  renderToggles();
  renderStats();
  renderMap();
  renderComparison();
}

function renderToggles(): void {
  const host = $("olus");
  const bits = state.bits;
  if (host.childElementCount !== bits.length) {
    host.innerHTML = "";
    bits.forEach((_, k) => {
      const btn = document.createElement("button");
      btn.id = `olu-${k}`;
      btn.textContent = `${k + 1}`;
      btn.title = `toggle protection for OLU ${k + 1}`;
      btn.addEventListener("click", () => onToggle(k));
      host.appendChild(btn);
    });
  }
  bits.forEach((b, k) => {
    $(`olu-${k}`).className = b ? "olu protected" : "olu";
  });
  $("scenario-string").textContent = `${bitsString(state)}_${state.slr}`;
}

function renderStats(): void {
  const response = state.lastResponse;
  const stats = $("stats");
  if (!response) {
    stats.textContent = "no prediction yet";
    return;
  }
  const s = response.summary;
  stats.innerHTML =
    `<b>flooded cells</b> ${s.flooded_cells} &nbsp; <b>max PWL</b> ${s.max_pwl.toFixed(3)} m` +
    ` &nbsp; <b>mean PWL</b> ${s.mean_pwl.toFixed(4)} m` +
    ` &nbsp; <b>inference</b> ${response.inference_ms.toFixed(1)} ms`;
}

function renderMap(): void {
  const response = state.lastResponse;
  if (!response) return;
  const canvas = $("map") as HTMLCanvasElement;
  const { n_rows, n_cols } = response.cells;
  const grid = decodeSparseGrid(response.cells);
  const { max } = legendBounds(grid);
  const base = gridToRgba(grid, n_rows, n_cols, (v) => floodColormap(v, max));

  let overlayPixels: Uint8ClampedArray | undefined;
  if (state.overlay !== "none" && overlayAvailable(response, state.overlay)) {
    const payload = state.overlay === "uncertainty" ? response.std_cells! : response.heatmap_cells!;
    const overlayGrid = decodeSparseGrid(payload);
    const bounds = legendBounds(overlayGrid);
    overlayPixels = gridToRgba(overlayGrid, n_rows, n_cols, (v) => overlayColormap(v, bounds.max));
    $("overlay-legend").textContent =
      `${state.overlay}: ${bounds.min.toFixed(4)} .. ${bounds.max.toFixed(4)}`;
  } else {
    $("overlay-legend").textContent = "";
  }
  drawGrid(canvas, base, n_rows, n_cols, overlayPixels);
  $("map-legend").textContent = `depth 0 .. ${max.toFixed(3)} m`;

  (["uncertainty", "gradcam"] as const).forEach((mode) => {
    ($(`overlay-${mode}`) as HTMLInputElement).disabled = !overlayAvailable(response, mode);
  });
}

function renderComparison(): void {
  const host = $("compare-panel");
  if (!state.comparison || !state.lastResponse) {
    host.style.display = "none";
    return;
  }
  host.style.display = "block";
  try {
    const view = compareResponses(state.comparison.response, state.lastResponse);
    const canvas = $("diff-map") as HTMLCanvasElement;
    const pixels = gridToRgba(view.diff, view.nRows, view.nCols, (v) =>
      divergingColormap(v, view.absMax),
    );
    drawGrid(canvas, pixels, view.nRows, view.nCols);
    $("compare-stats").textContent =
      `held ${state.comparison.bits.join("")}_${state.comparison.slr} vs current - ` +
      `flooded-cells delta ${view.floodedCellsDelta}, max-PWL delta ${view.maxPwlDelta.toFixed(3)} m`;
  } catch (err) {
    $("compare-stats").textContent = `comparison unavailable: ${(err as Error).message}`;
  }
}

export function boot(): void {
  $("connect").addEventListener("click", () => void connect());
  ($("slr") as HTMLInputElement).addEventListener("change", (e) =>
    onSlr(parseFloat((e.target as HTMLInputElement).value)),
  );
  $("hold").addEventListener("click", () => setState(holdComparison(state)));
  $("clear-hold").addEventListener("click", () => setState(clearComparison(state)));
  (["none", "uncertainty", "gradcam"] as const).forEach((mode) => {
    $(`overlay-${mode}`).addEventListener("click", () => onOverlay(mode));
  });
  void connect();
}

boot();
