/**
 * Typed client for the risk service. Every probability the console shows
 * comes through here; nothing is computed locally.
 */

import type {
  EvidenceValue,
  HealthResponse,
  ModelSummary,
  PredictResponse,
  WhatifOverride,
  WhatifResponse,
} from "./types.js";

export class ServiceError extends Error {
  constructor(
    public readonly status: number,
    public readonly detail: string,
  ) {
    super(`service returned ${status}: ${detail}`);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ServiceClient {
  private readonly base: string;
  private readonly fetchFn: FetchLike;

  constructor(baseUrl: string, fetchFn?: FetchLike) {
    this.base = baseUrl.replace(/\/+$/, "");
    this.fetchFn = fetchFn ?? ((input, init) => fetch(input, init));
  }

  async health(): Promise<HealthResponse> {
    return this.request("GET", "/health");
  }

  async model(): Promise<ModelSummary> {
    return this.request("GET", "/model");
  }

  async predict(
    evidence: Record<string, EvidenceValue>,
    raw: Record<string, number> = {},
  ): Promise<PredictResponse> {
    return this.request("POST", "/predict", { evidence, raw });
  }

  async whatif(
    evidence: Record<string, EvidenceValue>,
    raw: Record<string, number>,
    overrides: WhatifOverride[],
  ): Promise<WhatifResponse> {
    return this.request("POST", "/whatif", { evidence, raw, overrides });
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.headers = { "content-type": "application/json" };
      init.body = JSON.stringify(body);
    }
    let response: Response;
    try {
      response = await this.fetchFn(this.base + path, init);
    } catch (err) {
      throw new ServiceError(0, `service unreachable: ${(err as Error).message}`);
    }
    if (!response.ok) {
      let detail = response.statusText;
      try {
        const payload = await response.json();
        if (payload && typeof payload.detail === "string") detail = payload.detail;
        else detail = JSON.stringify(payload);
      } catch {
        /* keep statusText */
      }
      throw new ServiceError(response.status, detail);
    }
    return (await response.json()) as T;
  }
}
