/**
 * Issuer panel: registry onboarding with email-token confirmation, holder
 * ID review with an explicit accept tap, claims entry, and issuance of
 * test, vaccination, or pending lab-sample certificates.
 */

import { GatewayClient } from "../api.js";
import { StatusLine, button, el, guarded, labeledInput } from "../dom.js";
import { renderQr } from "../qr.js";

export function parseClaimLines(text: string): [string, string][] {
  const claims: [string, string][] = [];
  for (const raw of text.split("\n")) {
    const line = raw.trim();
    if (!line) continue;
    const idx = line.indexOf("=");
    if (idx <= 0) throw new Error(`claim line must be name=value: "${line}"`);
    claims.push([line.slice(0, idx).trim(), line.slice(idx + 1).trim()]);
  }
  if (claims.length === 0) throw new Error("at least one claim is required");
  return claims;
}

export function issuerPanel(client: GatewayClient, role: "issuer" | "lab" = "issuer"): HTMLElement {
  const panel = el("section", { class: "panel", "data-panel": role });
  let did: string | null = null;

  // -- onboarding ----------------------------------------------------
  const onboardStatus = new StatusLine();
  const reg = labeledInput("Registration number", { "data-field": "registration-no" });
  const branch = labeledInput("Branch", { "data-field": "branch" });
  const email = labeledInput("Email", { "data-field": "email" });
  const didOut = el("output", { class: "did", "data-field": "did" });

  const onboardBtn = button("Request registration", { "data-action": "onboard" });
  onboardBtn.addEventListener(
    "click",
    guarded(onboardStatus, async () => {
      const account = await client.issuerOnboard(
        reg.input.value,
        branch.input.value,
        email.input.value,
        role,
      );
      did = account.did;
      didOut.value = account.did;
      panel.dataset.did = account.did;
      onboardStatus.info(`state: ${account.state} — enter the emailed token`);
    }),
  );

  const token = labeledInput("Confirmation token", { "data-field": "token" });
  const fetchTokenBtn = button("Fetch from demo outbox", { "data-action": "fetch-token" });
  fetchTokenBtn.addEventListener(
    "click",
    guarded(onboardStatus, async () => {
      const t = await client.outboxTokenFor(email.input.value);
      if (t === null) throw new Error(`no outbox message for ${email.input.value}`);
      token.input.value = t;
    }),
  );
  const confirmBtn = button("Confirm", { "data-action": "confirm" });
  confirmBtn.addEventListener(
    "click",
    guarded(onboardStatus, async () => {
      if (did === null) throw new Error("onboard first");
      const account = await client.issuerConfirm(did, token.input.value);
      onboardStatus.info(`state: ${account.state}`);
      panel.dataset.state = account.state;
    }),
  );

  panel.append(
    el("h2", {}, [role === "lab" ? "Lab" : "Issuer"]),
    el("fieldset", {}, [
      el("legend", {}, ["Onboarding"]),
      reg.wrapper,
      branch.wrapper,
      email.wrapper,
      onboardBtn,
      didOut,
      token.wrapper,
      fetchTokenBtn,
      confirmBtn,
      onboardStatus.node,
    ]),
  );
  if (role === "lab") return panel;

  // -- certification -------------------------------------------------
  const certStatus = new StatusLine();
  const holderDid = labeledInput("Holder DID (scan or paste)", { "data-field": "holder-did" });
  const claims = el("textarea", {
    rows: "4",
    "data-field": "claims",
    placeholder: "one claim per line, name=value",
  });
  const photoBinding = el("input", { type: "checkbox", "data-field": "photo-binding" });
  photoBinding.checked = true;

  const kind = el("select", { "data-field": "kind" }, [
    el("option", { value: "test" }, ["Antibody test"]),
    el("option", { value: "vaccination" }, ["Vaccination"]),
    el("option", { value: "lab-sample" }, ["Lab sample (pending)"]),
  ]);
  const vaccineSource = labeledInput("Vaccine source", { "data-field": "vaccine-source" });
  const vaccineBatch = labeledInput("Vaccine batch", { "data-field": "vaccine-batch" });
  const sampleId = labeledInput("Sample ID", { "data-field": "sample-id" });

  // the accept tap is the human decision point: issuing stays disabled
  // until the issuer has reviewed the holder's ID
  const acceptBtn = button("Accept ID", { "data-action": "accept-id" });
  const issueBtn = button("Issue", { "data-action": "issue", disabled: "disabled" });
  acceptBtn.addEventListener("click", () => {
    if (!holderDid.input.value.trim()) {
      certStatus.error("enter the holder DID before accepting");
      return;
    }
    issueBtn.disabled = false;
    certStatus.info(`accepted ID for ${holderDid.input.value.trim()}`);
  });
  holderDid.input.addEventListener("input", () => {
    issueBtn.disabled = true;
  });

  const statusChip = el("span", { class: "chip", "data-field": "cert-status" });
  const qrBox = el("div", { class: "qr", "data-field": "issued-qr" });

  issueBtn.addEventListener(
    "click",
    guarded(certStatus, async () => {
      if (did === null) throw new Error("onboard and confirm first");
      const holder = holderDid.input.value.trim();
      statusChip.textContent = "";
      qrBox.replaceChildren();
      if (kind.value === "lab-sample") {
        const result = await client.certifyPending(did, holder, sampleId.input.value.trim());
        statusChip.textContent = "pending";
        renderQr(qrBox, result.sample_qr);
        certStatus.info("sample tag issued — hand the QR to the lab");
        return;
      }
      const result =
        kind.value === "vaccination"
          ? await client.vaccinate(
              did,
              holder,
              vaccineSource.input.value.trim(),
              vaccineBatch.input.value.trim(),
              photoBinding.checked,
            )
          : await client.certify(
              did,
              holder,
              parseClaimLines(claims.value),
              photoBinding.checked,
            );
      statusChip.textContent = "issued";
      renderQr(qrBox, result.qr_text);
      certStatus.info(`certificate anchored at ${result.anchor_url ?? "(pending)"}`);
    }),
  );

  panel.append(
    el("fieldset", {}, [
      el("legend", {}, ["Certification"]),
      holderDid.wrapper,
      el("label", { class: "field" }, ["Kind", kind]),
      el("label", { class: "field" }, ["Claims", claims]),
      vaccineSource.wrapper,
      vaccineBatch.wrapper,
      sampleId.wrapper,
      el("label", { class: "field" }, ["Photo binding", photoBinding]),
      acceptBtn,
      issueBtn,
      statusChip,
      qrBox,
      certStatus.node,
    ]),
  );
  return panel;
}
