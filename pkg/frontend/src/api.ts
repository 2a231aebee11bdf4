/**
 * Typed HTTP client for the certification gateway.
 *
 * The console talks to the gateway exclusively through this module; the
 * fetch implementation is injectable so tests can capture traffic.
 */

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export interface OnboardResult {
  did: string;
  state: string;
}

export interface CertificateSummary {
  id: string;
  status: string;
  photo_bound: boolean;
  claims: string[];
  anchor_url: string | null;
}

export interface CertifyResult {
  certificate: Record<string, unknown>;
  qr_text: string;
  anchor_url: string | null;
}

export interface PendingCertifyResult {
  certificate: Record<string, unknown>;
  sample_qr: string;
}

export interface VerifyReport {
  overall: boolean;
  checks: Record<string, boolean>;
  revealed: Record<string, string>;
  reasons: string[];
  photo?: string;
}

export interface LedgerStatus {
  chain_id: string;
  height: number;
  tip_digest_hex: string;
  authorities: string[];
  mempool: number;
}

export class GatewayError extends Error {
  constructor(
    readonly status: number,
    readonly kind: string,
    detail: string,
  ) {
    super(detail);
    this.name = "GatewayError";
  }
}

const PENDING_RETRY_MS = 100;
const PENDING_DEADLINE_MS = 15_000;

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

export class GatewayClient {
  readonly baseUrl: string;
  private readonly fetchImpl: FetchLike;

  constructor(baseUrl: string, fetchImpl?: FetchLike) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
    this.fetchImpl = fetchImpl ?? ((input, init) => fetch(input, init));
  }

  private async request(
    method: string,
    path: string,
    body?: unknown,
  ): Promise<Record<string, unknown>> {
    const init: RequestInit = { method, headers: {} };
    if (body !== undefined) {
      init.headers = { "content-type": "application/json" };
      init.body = JSON.stringify(body);
    }
    // 202 means a ledger anchor is not yet included in a block; retry
    // until the next block lands or the deadline passes
    const deadline = Date.now() + PENDING_DEADLINE_MS;
    let resp = await this.fetchImpl(this.baseUrl + path, init);
    while (resp.status === 202 && Date.now() < deadline) {
      await sleep(PENDING_RETRY_MS);
      resp = await this.fetchImpl(this.baseUrl + path, init);
    }
    let data: Record<string, unknown>;
    try {
      data = (await resp.json()) as Record<string, unknown>;
    } catch {
      data = { detail: `non-JSON response (HTTP ${resp.status})` };
    }
    if (resp.status >= 400 || resp.status === 202) {
      throw new GatewayError(
        resp.status,
        String(data.error ?? "Error"),
        String(data.detail ?? `HTTP ${resp.status}`),
      );
    }
    return data;
  }

  async ping(): Promise<boolean> {
    const data = await this.request("GET", "/ping");
    return data.status === "ok";
  }

  async issuerOnboard(
    registrationNo: string,
    branch: string,
    email: string,
    role: "issuer" | "lab" = "issuer",
  ): Promise<OnboardResult> {
    return (await this.request("POST", "/api/issuer/onboard", {
      registration_no: registrationNo,
      branch,
      email,
      role,
    })) as unknown as OnboardResult;
  }

  /** Demo stand-in for the confirmation email channel. */
  async outboxTokenFor(email: string): Promise<string | null> {
    const data = await this.request("GET", "/api/outbox");
    const messages = data.messages as { email: string; token: string }[];
    for (let i = messages.length - 1; i >= 0; i--) {
      if (messages[i].email === email) return messages[i].token;
    }
    return null;
  }

  async issuerConfirm(did: string, token: string): Promise<OnboardResult> {
    return (await this.request("POST", "/api/issuer/confirm", {
      did,
      token,
    })) as unknown as OnboardResult;
  }

  async holderOnboard(documentNumber: string, photoB64: string): Promise<string> {
    const data = await this.request("POST", "/api/holder/onboard", {
      document_number: documentNumber,
      photo: photoB64,
    });
    return data.did as string;
  }

  async certify(
    issuerDid: string,
    holderDid: string,
    claims: [string, string][],
    photoBinding = true,
  ): Promise<CertifyResult> {
    return (await this.request("POST", "/api/issuer/certify", {
      issuer_did: issuerDid,
      holder_did: holderDid,
      claims,
      photo_binding: photoBinding,
    })) as unknown as CertifyResult;
  }

  async certifyPending(
    issuerDid: string,
    holderDid: string,
    sampleId: string,
  ): Promise<PendingCertifyResult> {
    return (await this.request("POST", "/api/issuer/certify-pending", {
      issuer_did: issuerDid,
      holder_did: holderDid,
      sample_id: sampleId,
    })) as unknown as PendingCertifyResult;
  }

  async vaccinate(
    issuerDid: string,
    holderDid: string,
    vaccineSource: string,
    vaccineBatch: string,
    photoBinding = true,
  ): Promise<CertifyResult> {
    return (await this.request("POST", "/api/issuer/vaccinate", {
      issuer_did: issuerDid,
      holder_did: holderDid,
      vaccine_source: vaccineSource,
      vaccine_batch: vaccineBatch,
      photo_binding: photoBinding,
    })) as unknown as CertifyResult;
  }

  async labComplete(
    labDid: string,
    sampleQr: string,
    results: [string, string][],
  ): Promise<Record<string, unknown>> {
    return this.request("POST", "/api/lab/complete", {
      lab_did: labDid,
      sample_qr: sampleQr,
      results,
    });
  }

  async holderCertificates(did: string): Promise<CertificateSummary[]> {
    const data = await this.request("GET", `/api/holder/${did}/certificates`);
    return data.certificates as CertificateSummary[];
  }

  async present(did: string, certId: string, reveal: string[]): Promise<string> {
    const data = await this.request("POST", "/api/holder/present", {
      did,
      cert_id: certId,
      reveal,
    });
    return data.qr_text as string;
  }

  async optOut(did: string): Promise<Record<string, unknown>> {
    return this.request("POST", "/api/holder/optout", { did });
  }

  async backup(did: string): Promise<Record<string, unknown>> {
    return this.request("POST", "/api/holder/backup", { did });
  }

  async restore(did: string): Promise<Record<string, unknown>> {
    return this.request("POST", "/api/holder/restore", { did });
  }

  async verify(qrText: string): Promise<VerifyReport> {
    return (await this.request("POST", "/api/verify", {
      qr_text: qrText,
    })) as unknown as VerifyReport;
  }

  async ledgerStatus(): Promise<LedgerStatus> {
    return (await this.request("GET", "/api/ledger/status")) as unknown as LedgerStatus;
  }
}
