import { describe, expect, it } from "vitest";

import { ServiceClient, ServiceError } from "../src/client.js";

function fakeFetch(
  expected: { url: string; method: string; body?: unknown },
  reply: { status?: number; payload: unknown },
) {
  return async (url: string, init?: RequestInit): Promise<Response> => {
    expect(url).toBe(expected.url);
    expect(init?.method).toBe(expected.method);
    if (expected.body !== undefined) {
      expect(JSON.parse(String(init?.body))).toEqual(expected.body);
    }
    return new Response(JSON.stringify(reply.payload), {
      status: reply.status ?? 200,
      headers: { "content-type": "application/json" },
    });
  };
}

describe("service client", () => {
  it("strips trailing slashes from the base url", async () => {
    const client = new ServiceClient(
      "http://risk.local///",
      fakeFetch(
        { url: "http://risk.local/health", method: "GET" },
        { payload: { status: "ok", model_loaded: true, lr_loaded: false, model_version: "x" } },
      ),
    );
    const health = await client.health();
    expect(health.model_loaded).toBe(true);
  });

  it("posts evidence and raw values to /predict", async () => {
    const body = { evidence: { scenario: 2 }, raw: { response_time_s: 310 } };
    const client = new ServiceClient(
      "http://risk.local",
      fakeFetch(
        { url: "http://risk.local/predict", method: "POST", body },
        {
          payload: {
            p_error: 0.7,
            posterior: { Success: 0.3, Failure: 0.7 },
            evidence_used: {},
            missing_features: [],
            model_version: "v",
          },
        },
      ),
    );
    const result = await client.predict({ scenario: 2 }, { response_time_s: 310 });
    expect(result.p_error).toBe(0.7);
  });

  it("posts overrides to /whatif", async () => {
    const body = {
      evidence: {},
      raw: {},
      overrides: [{ feature: "scenario", state: 1 }],
    };
    const client = new ServiceClient(
      "http://risk.local",
      fakeFetch(
        { url: "http://risk.local/whatif", method: "POST", body },
        { payload: { base_p_error: 0.4, results: [], model_version: "v" } },
      ),
    );
    const result = await client.whatif({}, {}, [{ feature: "scenario", state: 1 }]);
    expect(result.base_p_error).toBe(0.4);
  });

  it("surfaces service error details with the status code", async () => {
    const client = new ServiceClient(
      "http://risk.local",
      async () =>
        new Response(JSON.stringify({ detail: "state 99 out of range" }), {
          status: 400,
        }),
    );
    await expect(client.predict({ scenario: 99 })).rejects.toMatchObject({
      status: 400,
      detail: "state 99 out of range",
    });
  });

  it("maps network failures to status 0", async () => {
    const client = new ServiceClient("http://risk.local", async () => {
      throw new Error("connection refused");
    });
    const err = await client.health().catch((e) => e as ServiceError);
    expect(err).toBeInstanceOf(ServiceError);
    expect((err as ServiceError).status).toBe(0);
  });
});
