// Popup rendering: the blocked-element list for the current page, with
// per-category restore toggles. Takes the document so tests can pass a
// fake; the real popup page calls renderPopup(document, core, origin).

import { ExtensionCore, PopupItem } from "./core.js";
import { Category } from "./types.js";

export interface PopupDocument {
  getElementById(id: string): {
    textContent: string | null;
    appendChild(child: unknown): unknown;
    innerHTML: string;
  } | null;
  createElement(tag: string): {
    textContent: string | null;
    className: string;
    onclick: (() => void) | null;
    appendChild(child: unknown): unknown;
  };
}

export function summarize(items: PopupItem[]): string {
  const blocked = items.filter((item) => item.blocked).length;
  if (items.length === 0) return "no scripts observed on this page";
  return `${blocked} of ${items.length} scripts blocked`;
}

export function renderPopup(
  doc: PopupDocument,
  core: ExtensionCore,
  pageOrigin: string,
  requestReload: () => void,
): void {
  const items = core.popupState(pageOrigin);
  const header = doc.getElementById("summary");
  if (header) header.textContent = summarize(items);
  const list = doc.getElementById("blocked-list");
  if (!list) return;
  list.innerHTML = "";
  for (const item of items) {
    const row = doc.createElement("li");
    row.className = item.blocked ? "blocked" : "loaded";
    row.textContent = `[${item.category}] ${item.url}`;
    if (item.overridable && item.blocked) {
      const restore = doc.createElement("button");
      restore.textContent = "load on this page";
      restore.onclick = () => {
        void core
          .setPageOverride(pageOrigin, item.category as Category, true)
          .then(requestReload);
      };
      row.appendChild(restore);
    }
    list.appendChild(row);
  }
}
