/** Small DOM construction helpers shared by the role panels. */

export function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  children: (Node | string)[] = [],
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    if (key === "class") node.className = value;
    else node.setAttribute(key, value);
  }
  for (const child of children) {
    node.append(child);
  }
  return node;
}

export function labeledInput(
  label: string,
  attrs: Record<string, string> = {},
): { wrapper: HTMLElement; input: HTMLInputElement } {
  const input = el("input", { type: "text", ...attrs });
  const wrapper = el("label", { class: "field" }, [label, input]);
  return { wrapper, input };
}

export function button(
  label: string,
  attrs: Record<string, string> = {},
): HTMLButtonElement {
  return el("button", { type: "button", ...attrs }, [label]);
}

/** Inline status line for surfacing gateway results and errors. */
export class StatusLine {
  readonly node: HTMLElement;

  constructor(cssClass = "status") {
    this.node = el("p", { class: cssClass, role: "status" });
  }

  info(text: string): void {
    this.node.textContent = text;
    this.node.dataset.kind = "info";
  }

  error(text: string): void {
    this.node.textContent = text;
    this.node.dataset.kind = "error";
  }

  clear(): void {
    this.node.textContent = "";
    delete this.node.dataset.kind;
  }
}

/** Run an async handler, routing failures to the status line. */
export function guarded(
  status: StatusLine,
  handler: () => Promise<void>,
): () => void {
  return () => {
    handler().catch((err: unknown) => {
      status.error(err instanceof Error ? err.message : String(err));
    });
  };
}
