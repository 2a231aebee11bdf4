/**
 * One page, four tabs: the same console serves every role. The app keeps
 * no state of its own beyond the DOM — reloading and resuming via
 * gateway reads reproduces the same view.
 */

import { GatewayClient } from "./api.js";
import { button, el } from "./dom.js";
import { holderPanel } from "./panels/holder.js";
import { issuerPanel } from "./panels/issuer.js";
import { labPanel } from "./panels/lab.js";
import { verifierPanel } from "./panels/verifier.js";

export interface AppOptions {
  client: GatewayClient;
}

export function createApp(root: HTMLElement, opts: AppOptions): void {
  const { client } = opts;
  const panels: [string, HTMLElement][] = [
    ["issuer", issuerPanel(client)],
    ["holder", holderPanel(client)],
    ["verifier", verifierPanel(client)],
    ["lab", labPanel(client)],
  ];

  const tabs = el("nav", { class: "tabs", role: "tablist" });
  function select(name: string): void {
    for (const [panelName, panel] of panels) {
      panel.hidden = panelName !== name;
    }
    for (const tab of tabs.querySelectorAll("button")) {
      tab.setAttribute("aria-selected", String(tab.dataset.tab === name));
    }
  }
  for (const [name] of panels) {
    const tab = button(name, { "data-tab": name, role: "tab" });
    tab.addEventListener("click", () => select(name));
    tabs.append(tab);
  }

  root.replaceChildren(
    el("header", {}, [el("h1", {}, ["Certification console"]), tabs]),
    ...panels.map(([, panel]) => panel),
  );
  select("issuer");
}
