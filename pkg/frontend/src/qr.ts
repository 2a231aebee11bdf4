/**
 * QR display: always shows the copyable envelope text (the paste-QR
 * baseline), plus a scannable SVG matrix when a QR encoder is available.
 *
 * In the browser the encoder is the vendored `qrcode` UMD bundle exposed
 * as a global; headless tests exercise the text path only.
 */

import { el } from "./dom.js";

interface QrEncoderGlobal {
  toString(
    text: string,
    opts: { type: string },
    cb: (err: Error | null, svg: string) => void,
  ): void;
}

function encoder(): QrEncoderGlobal | null {
  const g = globalThis as { QRCode?: QrEncoderGlobal };
  return g.QRCode ?? null;
}

export function renderQr(container: HTMLElement, text: string): void {
  container.replaceChildren();
  const textarea = el("textarea", {
    class: "qr-text",
    readonly: "readonly",
    rows: "6",
  });
  textarea.value = text;
  container.append(textarea);

  const enc = encoder();
  if (enc === null) return;
  enc.toString(text, { type: "svg" }, (err, svg) => {
    if (err) return;
    const holder = el("div", { class: "qr-matrix" });
    holder.innerHTML = svg;
    container.append(holder);
  });
}
