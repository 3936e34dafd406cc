import { describe, expect, it } from "vitest";

import { applyOverlays, overlayRect } from "../src/overlay.js";

const PAGE_W = 200;
const PAGE_H = 160;
const BBOX: [number, number, number, number] = [20, 30, 120, 90];

function container(): HTMLElement {
  const div = document.createElement("div");
  div.style.position = "relative";
  document.body.appendChild(div);
  return div;
}

function rectOf(el: HTMLElement) {
  return {
    left: parseFloat(el.style.left),
    top: parseFloat(el.style.top),
    width: parseFloat(el.style.width),
    height: parseFloat(el.style.height),
  };
}

describe("overlayRect", () => {
  it("is exact at 1x zoom", () => {
    const rect = overlayRect(BBOX, PAGE_W, PAGE_H, PAGE_W, PAGE_H);
    expect(rect).toEqual({ left: 20, top: 30, width: 100, height: 60 });
  });

  it("scales exactly at 2x zoom", () => {
    const rect = overlayRect(BBOX, PAGE_W, PAGE_H, PAGE_W * 2, PAGE_H * 2);
    expect(rect).toEqual({ left: 40, top: 60, width: 200, height: 120 });
  });

  it("handles non-uniform scales", () => {
    const rect = overlayRect(BBOX, PAGE_W, PAGE_H, 100, 160);
    expect(rect.left).toBeCloseTo(10, 10);
    expect(rect.width).toBeCloseTo(50, 10);
    expect(rect.top).toBe(30);
  });

  it("full-page bbox hugs the image edges at any zoom", () => {
    for (const zoom of [0.5, 1, 2, 3.5]) {
      const rect = overlayRect(
        [0, 0, PAGE_W, PAGE_H], PAGE_W, PAGE_H, PAGE_W * zoom, PAGE_H * zoom,
      );
      expect(rect.left).toBe(0);
      expect(rect.top).toBe(0);
      expect(rect.width).toBe(PAGE_W * zoom);
      expect(rect.height).toBe(PAGE_H * zoom);
    }
  });
});

describe("applyOverlays", () => {
  it("draws one positioned box per element within 1px", () => {
    const host = container();
    const drawn = applyOverlays(
      host,
      [{ kind: "chart", bbox: BBOX }],
      PAGE_W, PAGE_H, PAGE_W, PAGE_H,
    );
    expect(drawn).toHaveLength(1);
    const rect = rectOf(drawn[0]);
    expect(Math.abs(rect.left - 20)).toBeLessThan(1);
    expect(Math.abs(rect.top - 30)).toBeLessThan(1);
    expect(Math.abs(rect.width - 100)).toBeLessThan(1);
    expect(Math.abs(rect.height - 60)).toBeLessThan(1);
    expect(drawn[0].className).toContain("kind-chart");
  });

  it("redrawing from source pixels is stable across zoom changes", () => {
    const host = container();
    const boxes = [{ kind: "table" as const, bbox: BBOX }];
    const first = rectOf(
      applyOverlays(host, boxes, PAGE_W, PAGE_H, PAGE_W, PAGE_H)[0],
    );
    applyOverlays(host, boxes, PAGE_W, PAGE_H, PAGE_W * 2, PAGE_H * 2);
    const third = rectOf(
      applyOverlays(host, boxes, PAGE_W, PAGE_H, PAGE_W, PAGE_H)[0],
    );
    expect(third).toEqual(first); // no cumulative transforms
    expect(host.querySelectorAll(".overlay-box")).toHaveLength(1);
  });

  it("styles gold boxes distinctly from predictions", () => {
    const host = container();
    const drawn = applyOverlays(
      host,
      [
        { kind: "chart", bbox: BBOX },
        { kind: "gold", bbox: [22, 32, 118, 88], gold: true },
      ],
      PAGE_W, PAGE_H, PAGE_W, PAGE_H,
      { visibleKinds: new Set(["chart", "gold"]) },
    );
    expect(drawn).toHaveLength(2);
    expect(drawn[0].classList.contains("gold")).toBe(false);
    expect(drawn[1].classList.contains("gold")).toBe(true);
  });

  it("respects per-kind visibility toggles", () => {
    const host = container();
    const drawn = applyOverlays(
      host,
      [
        { kind: "chart", bbox: BBOX },
        { kind: "table", bbox: [10, 10, 50, 50] },
      ],
      PAGE_W, PAGE_H, PAGE_W, PAGE_H,
      { visibleKinds: new Set(["table"]) },
    );
    expect(drawn).toHaveLength(1);
    expect(drawn[0].dataset.kind).toBe("table");
  });
});
