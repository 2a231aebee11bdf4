/**
 * Holder panel: onboarding with ID document and photo, the certificate
 * list with per-claim disclosure checkboxes, QR presentation, backup and
 * restore, and a confirmed opt-out that orphans the ledger anchors.
 */

import { CertificateSummary, GatewayClient } from "../api.js";
import { StatusLine, button, el, guarded, labeledInput } from "../dom.js";
import { renderQr } from "../qr.js";

export function b64urlEncode(bytes: Uint8Array): string {
  let binary = "";
  for (const byte of bytes) binary += String.fromCharCode(byte);
  return btoa(binary).replace(/\+/g, "-").replace(/\//g, "_").replace(/=+$/, "");
}

export function holderPanel(client: GatewayClient): HTMLElement {
  const panel = el("section", { class: "panel", "data-panel": "holder" });
  let did: string | null = null;

  // -- onboarding ----------------------------------------------------
  const onboardStatus = new StatusLine();
  const docNo = labeledInput("ID document number", { "data-field": "document-number" });
  const photoFile = el("input", { type: "file", accept: "image/*", "data-field": "photo-file" });
  const didOut = el("output", { class: "did", "data-field": "did" });

  const onboardBtn = button("Create identity", { "data-action": "onboard" });
  onboardBtn.addEventListener(
    "click",
    guarded(onboardStatus, async () => {
      const file = photoFile.files?.[0];
      if (!file) throw new Error("choose an ID photo");
      const photo = b64urlEncode(new Uint8Array(await file.arrayBuffer()));
      did = await client.holderOnboard(docNo.input.value, photo);
      didOut.value = did;
      onboardStatus.info("identity anchored — share the DID with your issuer");
    }),
  );

  // -- certificates --------------------------------------------------
  const listStatus = new StatusLine();
  const list = el("ul", { class: "certs", "data-field": "certificates" });
  const qrBox = el("div", { class: "qr", "data-field": "presented-qr" });

  function renderList(certs: CertificateSummary[]): void {
    list.replaceChildren();
    for (const cert of certs) {
      const checkboxes: HTMLInputElement[] = [];
      const claimBoxes = cert.claims.map((name) => {
        const box = el("input", { type: "checkbox", "data-claim": name });
        box.checked = true;
        checkboxes.push(box);
        return el("label", { class: "claim" }, [box, name]);
      });
      const presentBtn = button("Present", { "data-action": "present" });
      presentBtn.addEventListener(
        "click",
        guarded(listStatus, async () => {
          if (did === null) throw new Error("onboard first");
          const reveal = checkboxes.filter((b) => b.checked).map((b) => b.dataset.claim!);
          const qrText = await client.present(did, cert.id, reveal);
          renderQr(qrBox, qrText);
          listStatus.info(`presenting ${reveal.length}/${cert.claims.length} claims`);
        }),
      );
      list.append(
        el("li", { "data-cert-id": cert.id }, [
          el("span", { class: "chip", "data-field": "status" }, [cert.status]),
          el("code", {}, [cert.id]),
          el("span", {}, [cert.photo_bound ? " photo-bound" : " no photo"]),
          el("div", { class: "claims" }, claimBoxes),
          presentBtn,
        ]),
      );
    }
  }

  const refreshBtn = button("Refresh", { "data-action": "refresh" });
  refreshBtn.addEventListener(
    "click",
    guarded(listStatus, async () => {
      if (did === null) throw new Error("onboard first");
      renderList(await client.holderCertificates(did));
      listStatus.info("list refreshed");
    }),
  );

  // -- backup / restore / opt-out ------------------------------------
  const lifecycleStatus = new StatusLine();
  const banner = el("p", { class: "banner", "data-field": "optout-banner" });

  const backupBtn = button("Back up", { "data-action": "backup" });
  backupBtn.addEventListener(
    "click",
    guarded(lifecycleStatus, async () => {
      if (did === null) throw new Error("onboard first");
      await client.backup(did);
      lifecycleStatus.info("pod backed up to the replica");
    }),
  );

  const restoreBtn = button("Restore", { "data-action": "restore" });
  restoreBtn.addEventListener(
    "click",
    guarded(lifecycleStatus, async () => {
      if (did === null) throw new Error("onboard first");
      await client.restore(did);
      renderList(await client.holderCertificates(did));
      banner.textContent = "";
      lifecycleStatus.info("restored from the replica");
    }),
  );

  // two-step confirmation: first tap arms, second tap erases
  const optOutBtn = button("Opt out", { "data-action": "optout" });
  optOutBtn.addEventListener(
    "click",
    guarded(lifecycleStatus, async () => {
      if (did === null) throw new Error("onboard first");
      if (optOutBtn.dataset.armed !== "true") {
        optOutBtn.dataset.armed = "true";
        optOutBtn.textContent = "Really erase everything?";
        lifecycleStatus.info("tap again to erase your pod and replica");
        return;
      }
      await client.optOut(did);
      list.replaceChildren();
      qrBox.replaceChildren();
      banner.textContent =
        "All personal data erased. Ledger anchors remain as orphaned digests that reveal nothing.";
      optOutBtn.dataset.armed = "false";
      optOutBtn.textContent = "Opt out";
      lifecycleStatus.info("opted out");
    }),
  );

  panel.append(
    el("h2", {}, ["Holder"]),
    el("fieldset", {}, [
      el("legend", {}, ["Onboarding"]),
      docNo.wrapper,
      el("label", { class: "field" }, ["ID photo", photoFile]),
      onboardBtn,
      didOut,
      onboardStatus.node,
    ]),
    el("fieldset", {}, [
      el("legend", {}, ["Certificates"]),
      refreshBtn,
      list,
      qrBox,
      listStatus.node,
    ]),
    el("fieldset", {}, [
      el("legend", {}, ["Data control"]),
      backupBtn,
      restoreBtn,
      optOutBtn,
      banner,
      lifecycleStatus.node,
    ]),
  );
  return panel;
}
