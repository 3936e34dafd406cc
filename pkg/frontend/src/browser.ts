/** Document browser: ingested documents, thumbnail strip, zoomable page
 * viewer with per-kind overlay toggles over the bundle's elements. */

import { ApiClient, ApiError } from "./api.js";
import { applyOverlays, elementsToBoxes } from "./overlay.js";
import { ALL_KINDS } from "./state.js";
import type { ElementKind, Manifest } from "./types.js";

function el(doc: Document, tag: string, className?: string, text?: string): HTMLElement {
  const node = doc.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function showToast(root: HTMLElement, message: string, retry: () => void): void {
  const doc = root.ownerDocument;
  const toast = el(doc, "div", "toast", message);
  const button = el(doc, "button", "toast-retry", "retry");
  button.addEventListener("click", () => {
    toast.remove();
    retry();
  });
  toast.appendChild(button);
  root.appendChild(toast);
}

export async function renderDocumentList(
  root: HTMLElement,
  api: ApiClient,
  onOpen: (docId: string) => void,
): Promise<void> {
  const doc = root.ownerDocument;
  root.innerHTML = "";
  root.appendChild(el(doc, "h2", undefined, "Documents"));
  let docs;
  try {
    docs = await api.listDocuments();
  } catch (err) {
    showToast(root, `could not list documents: ${String(err)}`, () => {
      void renderDocumentList(root, api, onOpen);
    });
    return;
  }
  const list = el(doc, "ul", "doc-list");
  for (const info of docs) {
    const item = el(doc, "li", "doc-entry");
    const link = el(doc, "button", "doc-link", `${info.doc_id} (${info.page_count} pages)`);
    link.dataset.docId = info.doc_id;
    link.addEventListener("click", () => onOpen(info.doc_id));
    item.appendChild(link);
    list.appendChild(item);
  }
  if (docs.length === 0) {
    list.appendChild(el(doc, "li", "muted", "no documents ingested yet"));
  }
  root.appendChild(list);
}

export class DocumentBrowser {
  zoom = 1;
  selectedPage: number | null = null;
  private readonly visibleKinds = new Set<ElementKind>(ALL_KINDS);
  private readonly doc: Document;
  private viewer: HTMLElement;

  constructor(
    readonly root: HTMLElement,
    readonly api: ApiClient,
    readonly manifest: Manifest,
  ) {
    this.doc = root.ownerDocument;
    root.innerHTML = "";
    root.appendChild(el(this.doc, "h2", undefined, manifest.doc_id));

    const toggles = el(this.doc, "div", "kind-toggles");
    for (const kind of ALL_KINDS) {
      const label = el(this.doc, "label", "kind-toggle");
      const box = el(this.doc, "input") as HTMLInputElement;
      box.type = "checkbox";
      box.checked = true;
      box.dataset.kind = kind;
      box.addEventListener("change", () => {
        if (box.checked) this.visibleKinds.add(kind);
        else this.visibleKinds.delete(kind);
        this.renderViewer();
      });
      label.append(box, this.doc.createTextNode(kind));
      toggles.appendChild(label);
    }
    root.appendChild(toggles);

    const strip = el(this.doc, "div", "thumb-strip");
    for (const page of manifest.pages) {
      const thumb = el(this.doc, "img", "thumb") as HTMLImageElement;
      thumb.src = api.pageImageUrl(manifest.doc_id, page.index);
      thumb.loading = "lazy";
      thumb.width = 96;
      thumb.alt = `page ${page.index}`;
      thumb.dataset.page = String(page.index);
      thumb.addEventListener("click", () => this.showPage(page.index));
      strip.appendChild(thumb);
    }
    root.appendChild(strip);

    this.viewer = el(this.doc, "div", "page-viewer");
    root.appendChild(this.viewer);
  }

  showPage(index: number, zoom?: number): void {
    this.selectedPage = index;
    if (zoom !== undefined) this.zoom = zoom;
    this.renderViewer();
  }

  setZoom(zoom: number): void {
    this.zoom = zoom;
    this.renderViewer();
  }

  private renderViewer(): void {
    this.viewer.innerHTML = "";
    if (this.selectedPage === null) return;
    const page = this.manifest.pages.find((p) => p.index === this.selectedPage);
    if (!page) return;
    const renderedW = page.width_px * this.zoom;
    const renderedH = page.height_px * this.zoom;

    const container = el(this.doc, "div", "page-container");
    container.dataset.pageContainer = String(page.index);
    container.style.position = "relative";
    container.style.width = `${renderedW}px`;
    container.style.height = `${renderedH}px`;

    const img = el(this.doc, "img", "page-image") as HTMLImageElement;
    img.src = this.api.pageImageUrl(this.manifest.doc_id, page.index);
    img.width = renderedW;
    img.height = renderedH;
    img.alt = `page ${page.index}`;
    container.appendChild(img);

    applyOverlays(
      container,
      elementsToBoxes(page.elements),
      page.width_px,
      page.height_px,
      renderedW,
      renderedH,
      { visibleKinds: this.visibleKinds },
    );
    this.viewer.appendChild(container);
  }
}

export async function renderDocumentView(
  root: HTMLElement,
  api: ApiClient,
  docId: string,
): Promise<DocumentBrowser | null> {
  try {
    const manifest = await api.getManifest(docId);
    return new DocumentBrowser(root, api, manifest);
  } catch (err) {
    root.innerHTML = "";
    if (err instanceof ApiError && err.status === 404) {
      const panel = el(root.ownerDocument, "div", "not-found");
      panel.appendChild(
        el(root.ownerDocument, "p", undefined, `No such document: ${docId}`),
      );
      root.appendChild(panel);
    } else {
      showToast(root, `could not load document: ${String(err)}`, () => {
        void renderDocumentView(root, api, docId);
      });
    }
    return null;
  }
}
