import { beforeEach, describe, expect, it } from "vitest";

import { FetchLike, GatewayClient } from "../src/api.js";
import { createApp } from "../src/app.js";
import { b64urlEncode } from "../src/panels/holder.js";
import { parseClaimLines } from "../src/panels/issuer.js";
import { verifierPanel } from "../src/panels/verifier.js";

function jsonResponse(status: number, payload: unknown): Response {
  return new Response(JSON.stringify(payload), {
    status,
    headers: { "content-type": "application/json" },
  });
}

function clientWith(handler: (url: string, body: unknown) => Response): GatewayClient {
  const fetchImpl: FetchLike = async (url, init) =>
    handler(url, init?.body ? JSON.parse(String(init.body)) : undefined);
  return new GatewayClient("http://gw.example", fetchImpl);
}

async function settle(): Promise<void> {
  // let queued click handlers and their awaited fetches run
  for (let i = 0; i < 10; i++) await new Promise((r) => setTimeout(r, 0));
}

describe("parseClaimLines", () => {
  it("parses name=value lines and trims whitespace", () => {
    expect(parseClaimLines("a=1\n  b = two \n\n")).toEqual([
      ["a", "1"],
      ["b", "two"],
    ]);
  });

  it("keeps equals signs inside the value", () => {
    expect(parseClaimLines("note=x=y")).toEqual([["note", "x=y"]]);
  });

  it("rejects lines without a name", () => {
    expect(() => parseClaimLines("=value")).toThrow(/name=value/);
    expect(() => parseClaimLines("no separator")).toThrow(/name=value/);
    expect(() => parseClaimLines("")).toThrow(/at least one/);
  });
});

describe("b64urlEncode", () => {
  it("matches the unpadded URL-safe alphabet", () => {
    // oracle: python base64.urlsafe_b64encode(bytes([251, 239, 190])).rstrip(b"=") == b"----"
    expect(b64urlEncode(new Uint8Array([251, 239, 190]))).toBe("----");
    expect(b64urlEncode(new Uint8Array([0]))).toBe("AA");
    expect(b64urlEncode(new Uint8Array())).toBe("");
  });
});

describe("createApp", () => {
  let root: HTMLElement;

  beforeEach(() => {
    document.body.innerHTML = '<div id="app"></div>';
    root = document.getElementById("app")!;
  });

  it("renders four role tabs and switches panels", () => {
    createApp(root, { client: clientWith(() => jsonResponse(200, {})) });
    const tabs = [...root.querySelectorAll("nav button")].map((b) => b.textContent);
    expect(tabs).toEqual(["issuer", "holder", "verifier", "lab"]);

    const issuer = root.querySelector<HTMLElement>('[data-panel="issuer"]')!;
    const verifier = root.querySelector<HTMLElement>('[data-panel="verifier"]')!;
    expect(issuer.hidden).toBe(false);
    expect(verifier.hidden).toBe(true);

    root.querySelector<HTMLButtonElement>('[data-tab="verifier"]')!.click();
    expect(issuer.hidden).toBe(true);
    expect(verifier.hidden).toBe(false);
  });

  it("keeps the issue button disabled until the issuer accepts the ID", () => {
    createApp(root, { client: clientWith(() => jsonResponse(200, {})) });
    const panel = root.querySelector<HTMLElement>('[data-panel="issuer"]')!;
    const holderDid = panel.querySelector<HTMLInputElement>('[data-field="holder-did"]')!;
    const accept = panel.querySelector<HTMLButtonElement>('[data-action="accept-id"]')!;
    const issue = panel.querySelector<HTMLButtonElement>('[data-action="issue"]')!;

    expect(issue.disabled).toBe(true);
    accept.click(); // no DID entered yet: stays disabled
    expect(issue.disabled).toBe(true);

    holderDid.value = "did:cov:holder";
    accept.click();
    expect(issue.disabled).toBe(false);

    // editing the DID revokes the acceptance
    holderDid.value = "did:cov:other";
    holderDid.dispatchEvent(new Event("input"));
    expect(issue.disabled).toBe(true);
  });

  it("surfaces gateway onboarding errors inline without state change", async () => {
    createApp(root, {
      client: clientWith(() =>
        jsonResponse(400, { error: "RegistryRejected", detail: "unknown registration number" }),
      ),
    });
    const panel = root.querySelector<HTMLElement>('[data-panel="issuer"]')!;
    panel.querySelector<HTMLButtonElement>('[data-action="onboard"]')!.click();
    await settle();
    expect(panel.querySelector(".status")!.textContent).toMatch(/unknown registration number/);
    expect(panel.querySelector<HTMLOutputElement>('[data-field="did"]')!.value).toBe("");
  });
});

describe("verifierPanel", () => {
  beforeEach(() => {
    document.body.innerHTML = "";
  });

  function verify(panel: HTMLElement, qrText: string): void {
    panel.querySelector<HTMLTextAreaElement>('[data-field="qr-input"]')!.value = qrText;
    panel.querySelector<HTMLButtonElement>('[data-action="verify"]')!.click();
  }

  it("renders a green report with ticks and revealed claims", async () => {
    const panel = verifierPanel(
      clientWith(() =>
        jsonResponse(200, {
          overall: true,
          checks: { anchor_match: true, issuer_sig: true, holder_sig: true, commitments: true, photo_available: true },
          revealed: { result: "positive" },
          reasons: [],
          photo: "aGk",
        }),
      ),
    );
    document.body.append(panel);
    verify(panel, "COVC1.a.b");
    await settle();

    const overall = panel.querySelector<HTMLElement>('[data-field="overall"]')!;
    expect(overall.textContent).toBe("VALID");
    expect(overall.dataset.state).toBe("green");
    expect(panel.querySelectorAll('[data-ok="true"]').length).toBe(5);
    expect(panel.querySelector('dd[data-claim="result"]')!.textContent).toBe("positive");
    expect(panel.querySelector<HTMLImageElement>('[data-field="photo"]')!.hidden).toBe(false);
  });

  it("shows an amber physical-ID warning when no photo is bound", async () => {
    const panel = verifierPanel(
      clientWith(() =>
        jsonResponse(200, {
          overall: true,
          checks: { anchor_match: true, issuer_sig: true, holder_sig: true, commitments: true, photo_available: false },
          revealed: {},
          reasons: ["PhysicalIdRequired"],
        }),
      ),
    );
    document.body.append(panel);
    verify(panel, "COVC1.a.b");
    await settle();

    const overall = panel.querySelector<HTMLElement>('[data-field="overall"]')!;
    expect(overall.textContent).toMatch(/physical ID required/);
    expect(overall.dataset.state).toBe("amber");
  });

  it("renders tampered QR input as red with the failure reason", async () => {
    const panel = verifierPanel(
      clientWith(() =>
        jsonResponse(400, { error: "CorruptPayload", detail: "check digits do not match" }),
      ),
    );
    document.body.append(panel);
    verify(panel, "COVC1.tampered.x");
    await settle();

    const overall = panel.querySelector<HTMLElement>('[data-field="overall"]')!;
    expect(overall.textContent).toBe("NOT VALID");
    expect(overall.dataset.state).toBe("red");
    expect(panel.querySelector('[data-field="reasons"]')!.textContent).toMatch(
      /CorruptPayload: check digits do not match/,
    );
  });
});
