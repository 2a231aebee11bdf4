import { describe, expect, it } from "vitest";

import { FetchLike, GatewayClient, GatewayError } from "../src/api.js";

interface Recorded {
  url: string;
  method: string;
  body: unknown;
}

function jsonResponse(status: number, payload: unknown): Response {
  return new Response(JSON.stringify(payload), {
    status,
    headers: { "content-type": "application/json" },
  });
}

function stubFetch(
  handler: (call: Recorded, callIndex: number) => Response,
): { fetchImpl: FetchLike; calls: Recorded[] } {
  const calls: Recorded[] = [];
  const fetchImpl: FetchLike = async (url, init) => {
    const call: Recorded = {
      url,
      method: init?.method ?? "GET",
      body: init?.body ? JSON.parse(String(init.body)) : undefined,
    };
    calls.push(call);
    return handler(call, calls.length - 1);
  };
  return { fetchImpl, calls };
}

describe("GatewayClient", () => {
  it("strips trailing slashes from the base URL", async () => {
    const { fetchImpl, calls } = stubFetch(() => jsonResponse(200, { status: "ok" }));
    const client = new GatewayClient("http://gw.example//", fetchImpl);
    expect(await client.ping()).toBe(true);
    expect(calls[0].url).toBe("http://gw.example/ping");
  });

  it("posts JSON bodies with the content-type header", async () => {
    const { fetchImpl, calls } = stubFetch(() =>
      jsonResponse(200, { did: "did:cov:x", state: "pending_email" }),
    );
    const client = new GatewayClient("http://gw.example", fetchImpl);
    const account = await client.issuerOnboard("GPhC-1", "Branch", "a@b.example");
    expect(account.state).toBe("pending_email");
    expect(calls[0].method).toBe("POST");
    expect(calls[0].body).toEqual({
      registration_no: "GPhC-1",
      branch: "Branch",
      email: "a@b.example",
      role: "issuer",
    });
  });

  it("retries while the gateway reports a pending anchor", async () => {
    const { fetchImpl, calls } = stubFetch((_call, i) =>
      i < 2
        ? jsonResponse(202, { error: "Pending", detail: "awaiting block" })
        : jsonResponse(200, { certificate: {}, qr_text: "COVC1.x.y", anchor_url: "anchor://c/1" }),
    );
    const client = new GatewayClient("http://gw.example", fetchImpl);
    const result = await client.certify("did:cov:i", "did:cov:h", [["result", "positive"]]);
    expect(result.qr_text).toBe("COVC1.x.y");
    expect(calls.length).toBe(3);
  });

  it("maps gateway errors onto GatewayError with kind and detail", async () => {
    const { fetchImpl } = stubFetch(() =>
      jsonResponse(404, { error: "NotFound", detail: "unknown holder" }),
    );
    const client = new GatewayClient("http://gw.example", fetchImpl);
    const failure = await client.holderCertificates("did:cov:missing").catch((e) => e);
    expect(failure).toBeInstanceOf(GatewayError);
    expect(failure.status).toBe(404);
    expect(failure.kind).toBe("NotFound");
    expect(failure.message).toBe("unknown holder");
  });

  it("surfaces non-JSON responses as errors", async () => {
    const { fetchImpl } = stubFetch(() => new Response("boom", { status: 500 }));
    const client = new GatewayClient("http://gw.example", fetchImpl);
    await expect(client.ping()).rejects.toThrow(/HTTP 500/);
  });

  it("picks the latest outbox token for the given address", async () => {
    const { fetchImpl } = stubFetch(() =>
      jsonResponse(200, {
        messages: [
          { email: "a@b.example", token: "old" },
          { email: "other@b.example", token: "not-mine" },
          { email: "a@b.example", token: "fresh" },
        ],
      }),
    );
    const client = new GatewayClient("http://gw.example", fetchImpl);
    expect(await client.outboxTokenFor("a@b.example")).toBe("fresh");
    expect(await client.outboxTokenFor("nobody@b.example")).toBeNull();
  });
});
