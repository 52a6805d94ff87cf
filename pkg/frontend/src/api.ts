/** Typed fetch client for the scenario-inference service. */

import type { PredictRequest, PredictResponse, RegionMeta } from "./types.js";

export class ApiError extends Error {
  constructor(message: string, readonly status: number) {
    super(message);
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const res = await fetch(url, init);
  if (!res.ok) {
    const body = await res.json().catch(() => ({}));
    throw new ApiError((body as { detail?: string }).detail ?? `HTTP ${res.status}`, res.status);
  }
  return res.json() as Promise<T>;
}

export class ScenarioClient {
  constructor(readonly baseUrl: string) {}

  health(): Promise<{ status: string; version: string; model_version: string }> {
    return request(`${this.baseUrl}/health`);
  }

  region(): Promise<RegionMeta> {
    return request(`${this.baseUrl}/region`);
  }

  predict(req: PredictRequest, signal?: AbortSignal): Promise<PredictResponse> {
    return request(`${this.baseUrl}/predict`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(req),
      signal,
    });
  }
}
