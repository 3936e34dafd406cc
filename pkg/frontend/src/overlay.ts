/** Bounding-box overlay geometry and rendering.
 *
 * Rectangles are always computed fresh from source-pixel coordinates and
 * the current rendered size (never by transforming previous rectangles),
 * so alignment is exact at any zoom and stable under resize.
 */

import type { ManifestElement } from "./types.js";

export interface RenderedRect {
  left: number;
  top: number;
  width: number;
  height: number;
}

export function overlayRect(
  bbox: [number, number, number, number],
  pageWidth: number,
  pageHeight: number,
  renderedWidth: number,
  renderedHeight: number,
): RenderedRect {
  const sx = renderedWidth / pageWidth;
  const sy = renderedHeight / pageHeight;
  return {
    left: bbox[0] * sx,
    top: bbox[1] * sy,
    width: (bbox[2] - bbox[0]) * sx,
    height: (bbox[3] - bbox[1]) * sy,
  };
}

export interface OverlayBox {
  kind: string;
  bbox: [number, number, number, number];
  gold?: boolean;
}

export interface OverlayOptions {
  /** element kinds currently toggled visible; undefined shows all */
  visibleKinds?: Set<string>;
}

/** (Re)draw overlay rectangles into a page container.
 *
 * The container must be position:relative and sized to the rendered
 * page. Previous overlays are removed first; boxes arrive in source
 * pixels and are scaled against the declared page dimensions.
 */
export function applyOverlays(
  container: HTMLElement,
  boxes: OverlayBox[],
  pageWidth: number,
  pageHeight: number,
  renderedWidth: number,
  renderedHeight: number,
  options: OverlayOptions = {},
): HTMLElement[] {
  for (const stale of Array.from(container.querySelectorAll(".overlay-box"))) {
    stale.remove();
  }
  const drawn: HTMLElement[] = [];
  boxes.forEach((box, i) => {
    if (options.visibleKinds && !options.visibleKinds.has(box.kind)) return;
    const rect = overlayRect(box.bbox, pageWidth, pageHeight, renderedWidth, renderedHeight);
    const div = container.ownerDocument.createElement("div");
    div.className = `overlay-box kind-${box.kind}${box.gold ? " gold" : ""}`;
    div.dataset.kind = box.kind;
    div.dataset.index = String(i);
    div.style.position = "absolute";
    div.style.left = `${rect.left}px`;
    div.style.top = `${rect.top}px`;
    div.style.width = `${rect.width}px`;
    div.style.height = `${rect.height}px`;
    container.appendChild(div);
    drawn.push(div);
  });
  return drawn;
}

export function elementsToBoxes(
  elements: ManifestElement[],
  gold = false,
): OverlayBox[] {
  return elements.map((el) => ({ kind: el.kind, bbox: el.bbox, gold }));
}
