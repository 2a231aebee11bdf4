/**
 * Verifier panel: paste-or-scan QR input and a live report with per-check
 * ticks, the revealed claims, and the bound photo when available. Needs
 * no account: anyone holding a presentation QR can check it.
 */

import { GatewayClient, GatewayError } from "../api.js";
import { StatusLine, button, el, guarded } from "../dom.js";

export function verifierPanel(client: GatewayClient): HTMLElement {
  const panel = el("section", { class: "panel", "data-panel": "verifier" });
  const status = new StatusLine();

  const qrInput = el("textarea", {
    rows: "6",
    "data-field": "qr-input",
    placeholder: "paste the presented QR text (COVC1.…)",
  });

  const overall = el("p", { class: "overall", "data-field": "overall" });
  const checks = el("ul", { class: "checks", "data-field": "checks" });
  const revealed = el("dl", { class: "revealed", "data-field": "revealed" });
  const reasons = el("ul", { class: "reasons", "data-field": "reasons" });
  const photo = el("img", { class: "holder-photo", "data-field": "photo", alt: "holder photo" });
  photo.hidden = true;

  function renderReport(report: {
    overall: boolean;
    checks: Record<string, boolean>;
    revealed: Record<string, string>;
    reasons: string[];
    photo?: string;
  }): void {
    // photo_available is advisory: when the photo is absent the verifier
    // falls back to a physical ID, shown as an amber warning
    const physicalIdRequired = report.checks.photo_available === false;
    overall.textContent = report.overall
      ? physicalIdRequired
        ? "VALID — physical ID required"
        : "VALID"
      : "NOT VALID";
    overall.dataset.state = report.overall
      ? physicalIdRequired
        ? "amber"
        : "green"
      : "red";

    checks.replaceChildren(
      ...Object.entries(report.checks).map(([name, ok]) =>
        el("li", { "data-check": name, "data-ok": String(ok) }, [
          `${ok ? "✔" : "✘"} ${name}`,
        ]),
      ),
    );
    revealed.replaceChildren(
      ...Object.entries(report.revealed).flatMap(([name, value]) => [
        el("dt", {}, [name]),
        el("dd", { "data-claim": name }, [value]),
      ]),
    );
    reasons.replaceChildren(...report.reasons.map((r) => el("li", {}, [r])));

    if (report.photo) {
      photo.src = `data:image/jpeg;base64,${report.photo.replace(/-/g, "+").replace(/_/g, "/")}`;
      photo.hidden = false;
    } else {
      photo.removeAttribute("src");
      photo.hidden = true;
    }
  }

  const verifyBtn = button("Verify", { "data-action": "verify" });
  verifyBtn.addEventListener(
    "click",
    guarded(status, async () => {
      status.clear();
      try {
        renderReport(await client.verify(qrInput.value.trim()));
      } catch (err) {
        overall.textContent = "NOT VALID";
        overall.dataset.state = "red";
        checks.replaceChildren();
        revealed.replaceChildren();
        photo.hidden = true;
        reasons.replaceChildren(
          el("li", {}, [err instanceof GatewayError ? `${err.kind}: ${err.message}` : String(err)]),
        );
      }
    }),
  );

  panel.append(
    el("h2", {}, ["Verifier"]),
    el("label", { class: "field" }, ["Presented QR", qrInput]),
    verifyBtn,
    overall,
    checks,
    revealed,
    photo,
    reasons,
    status.node,
  );
  return panel;
}
