/**
 * Lab panel: the same registry onboarding as an issuer (with the lab
 * role), plus completion of pending sample certificates — the lab scans
 * the sample tag QR, enters results, and countersigns.
 */

import { GatewayClient } from "../api.js";
import { StatusLine, button, el, guarded } from "../dom.js";
import { issuerPanel, parseClaimLines } from "./issuer.js";

export function labPanel(client: GatewayClient): HTMLElement {
  const panel = issuerPanel(client, "lab");

  const status = new StatusLine();
  const sampleQr = el("textarea", {
    rows: "4",
    "data-field": "sample-qr",
    placeholder: "paste the sample tag QR text",
  });
  const results = el("textarea", {
    rows: "4",
    "data-field": "results",
    placeholder: "one result per line, name=value",
  });
  const doneOut = el("output", { "data-field": "completed-cert" });

  const completeBtn = button("Complete sample", { "data-action": "complete" });
  completeBtn.addEventListener(
    "click",
    guarded(status, async () => {
      const did = panel.dataset.did;
      if (!did) throw new Error("onboard and confirm first");
      const data = await client.labComplete(did, sampleQr.value.trim(), parseClaimLines(results.value));
      const cert = data.certificate as { id?: string };
      doneOut.value = String(cert.id ?? "");
      status.info("results signed — the holder's certificate is now complete");
    }),
  );

  panel.append(
    el("fieldset", {}, [
      el("legend", {}, ["Sample completion"]),
      el("label", { class: "field" }, ["Sample tag", sampleQr]),
      el("label", { class: "field" }, ["Results", results]),
      completeBtn,
      doneOut,
      status.node,
    ]),
  );
  return panel;
}
