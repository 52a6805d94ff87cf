/** Wire types mirroring the inference service's JSON schema. */

/** Sparse run-length grid: runs of consecutive nonzero values over
 * row-major flat indices. */
export interface SparseGrid {
  n_rows: number;
  n_cols: number;
  runs: [number, number[]][];
}

export interface RegionMeta {
  name: string;
  olu_count: number;
  olu_boundaries: number[][][];
  slr_range: [number, number];
  grid_n: number;
  model_version: string;
}

export interface PredictRequest {
  bits: string;
  slr_m: number;
  uncertainty?: boolean;
  gradcam?: boolean;
  reference?: SparseGrid | null;
}

export interface PredictSummary {
  flooded_cells: number;
  max_pwl: number;
  mean_pwl: number;
  wet_threshold_m?: number;
  dsc_vs_reference?: number;
}

export interface PredictResponse {
  cells: SparseGrid;
  std_cells?: SparseGrid;
  heatmap_cells?: SparseGrid;
  model_version: string;
  inference_ms: number;
  summary: PredictSummary;
}
