/** Pure scenario-explorer state and its transitions.
 *
 * The rendered view is a function of (region metadata, toggle vector,
 * SLR selection, last accepted response); no model math happens on the
 * client. Responses are accepted only if they answer the most recent
 * request (sequence-number supersession), so at most one in-flight
 * prediction ever renders.
 */

import type { PredictResponse, RegionMeta } from "./types.js";

export type OverlayMode = "none" | "uncertainty" | "gradcam";

export interface ComparisonSlot {
  bits: number[];
  slr: number;
  response: PredictResponse;
}

export interface ScenarioState {
  region: RegionMeta | null;
  bits: number[];
  slr: number;
  lastResponse: PredictResponse | null;
  lastResponseBits: number[] | null;
  comparison: ComparisonSlot | null;
  overlay: OverlayMode;
  requestSeq: number;
  acceptedSeq: number;
  pending: boolean;
  error: string | null;
}

export function initialState(): ScenarioState {
  return {
    region: null,
    bits: [],
    slr: 0.5,
    lastResponse: null,
    lastResponseBits: null,
    comparison: null,
    overlay: "none",
    requestSeq: 0,
    acceptedSeq: 0,
    pending: false,
    error: null,
  };
}

export function withRegion(state: ScenarioState, region: RegionMeta): ScenarioState {
  const [lo, hi] = region.slr_range;
  const slr = Math.min(Math.max(state.slr, lo), hi);
  return { ...state, region, bits: new Array(region.olu_count).fill(0), slr };
}

export function toggleBit(state: ScenarioState, index: number): ScenarioState {
  if (index < 0 || index >= state.bits.length) {
    throw new Error(`OLU index ${index} out of range 0..${state.bits.length - 1}`);
  }
  const bits = state.bits.slice();
  bits[index] = 1 - bits[index];
  return { ...state, bits };
}

export function setBits(state: ScenarioState, bits: number[]): ScenarioState {
  if (state.region && bits.length !== state.region.olu_count) {
    throw new Error(`expected ${state.region.olu_count} bits, got ${bits.length}`);
  }
  return { ...state, bits: bits.slice() };
}

export function setSlr(state: ScenarioState, slr: number): ScenarioState {
  return { ...state, slr };
}

export function bitsString(state: ScenarioState): string {
  return state.bits.join("");
}

/** Reserve the next request sequence number. */
export function beginRequest(state: ScenarioState): { state: ScenarioState; seq: number } {
  const seq = state.requestSeq + 1;
  return { state: { ...state, requestSeq: seq, pending: true, error: null }, seq };
}

/** Accept a response only if it answers the latest request; stale
 * responses leave the state untouched. */
export function acceptResponse(
  state: ScenarioState,
  seq: number,
  bits: number[],
  response: PredictResponse,
): ScenarioState {
  if (seq !== state.requestSeq) return state;
  const overlay = overlayAvailable(response, state.overlay) ? state.overlay : "none";
  return {
    ...state,
    lastResponse: response,
    lastResponseBits: bits.slice(),
    acceptedSeq: seq,
    pending: false,
    error: null,
    overlay,
  };
}

/** Record a failure without discarding the last good map. */
export function rejectRequest(state: ScenarioState, seq: number, message: string): ScenarioState {
  if (seq !== state.requestSeq) return state;
  return { ...state, pending: false, error: message };
}

export function overlayAvailable(response: PredictResponse | null, mode: OverlayMode): boolean {
  if (mode === "none") return true;
  if (!response) return false;
  return mode === "uncertainty" ? !!response.std_cells : !!response.heatmap_cells;
}

export function setOverlay(state: ScenarioState, mode: OverlayMode): ScenarioState {
  if (!overlayAvailable(state.lastResponse, mode)) return state;
  return { ...state, overlay: mode };
}

/** Snapshot the current accepted response into the comparison slot. */
export function holdComparison(state: ScenarioState): ScenarioState {
  if (!state.lastResponse || !state.lastResponseBits) return state;
  return {
    ...state,
    comparison: {
      bits: state.lastResponseBits.slice(),
      slr: state.slr,
      response: state.lastResponse,
    },
  };
}

export function clearComparison(state: ScenarioState): ScenarioState {
  return { ...state, comparison: null };
}
