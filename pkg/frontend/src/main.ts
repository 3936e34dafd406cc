/** Entry point: hash routing between the document browser and the
 * ask-and-trace workbench. Served by the API under /ui, so the API base
 * is the page origin. */

import { ApiClient, ApiError } from "./api.js";
import { renderDocumentList, renderDocumentView, showToast } from "./browser.js";
import { Workbench } from "./workbench.js";

const api = new ApiClient("");

async function route(): Promise<void> {
  const root = document.getElementById("app");
  if (!root) return;
  const hash = window.location.hash || "#/";
  const parts = hash.replace(/^#\//, "").split("/").filter(Boolean);

  if (parts.length === 0) {
    await renderDocumentList(root, api, (docId) => {
      window.location.hash = `#/doc/${encodeURIComponent(docId)}`;
    });
    return;
  }
  if (parts[0] === "doc" && parts.length >= 2) {
    const docId = decodeURIComponent(parts[1]);
    if (parts[2] === "ask") {
      try {
        const manifest = await api.getManifest(docId);
        root.innerHTML = "";
        const back = document.createElement("a");
        back.href = `#/doc/${encodeURIComponent(docId)}`;
        back.textContent = "back to pages";
        back.className = "back-link";
        const mount = document.createElement("div");
        root.append(back, mount);
        new Workbench(mount, api, manifest);
      } catch (err) {
        root.innerHTML = "";
        if (err instanceof ApiError && err.status === 404) {
          root.textContent = `No such document: ${docId}`;
        } else {
          showToast(root, String(err), () => void route());
        }
      }
      return;
    }
    const browser = await renderDocumentView(root, api, docId);
    if (browser) {
      const ask = document.createElement("a");
      ask.href = `#/doc/${encodeURIComponent(docId)}/ask`;
      ask.textContent = "ask a question";
      ask.className = "ask-link";
      root.prepend(ask);
    }
    return;
  }
  root.textContent = "Unknown view";
}

window.addEventListener("hashchange", () => void route());
void route();
