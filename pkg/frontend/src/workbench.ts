/** Ask-and-trace view: submit a question, watch the stage timeline fill
 * in over SSE, then inspect evidence pages, candidates, and the final
 * answer. One active run per tab; finished runs land in the per-document
 * question history. */

import { ApiClient } from "./api.js";
import { applyOverlays, elementsToBoxes, type OverlayBox } from "./overlay.js";
import {
  initialState,
  pushHistory,
  selectDocument,
  startRun,
  toggleKind,
  type ViewState,
} from "./state.js";
import type {
  ElementKind,
  Manifest,
  ManifestPage,
  StageEvent,
  Trace,
} from "./types.js";

export const STAGES = ["navigating", "localizing", "sampling", "adjudicating"] as const;

function el(
  doc: Document,
  tag: string,
  className?: string,
  text?: string,
): HTMLElement {
  const node = doc.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export interface WorkbenchOptions {
  /** gold element boxes per page index, drawn distinctly when present */
  goldBoxes?: Record<number, [number, number, number, number][]>;
}

export class Workbench {
  readonly state: ViewState;
  readonly stageLog: StageEvent[] = [];
  trace: Trace | null = null;
  running = false;

  private readonly doc: Document;
  private readonly pages = new Map<number, ManifestPage>();
  private readonly panels: {
    timeline: HTMLElement;
    samples: HTMLElement;
    epred: HTMLElement;
    pagesPanel: HTMLElement;
    candidates: HTMLElement;
    answer: HTMLElement;
    history: HTMLElement;
    error: HTMLElement;
  };

  constructor(
    readonly root: HTMLElement,
    readonly api: ApiClient,
    readonly manifest: Manifest,
    readonly options: WorkbenchOptions = {},
  ) {
    this.doc = root.ownerDocument;
    this.state = initialState();
    selectDocument(this.state, manifest.doc_id);
    for (const page of manifest.pages) this.pages.set(page.index, page);

    root.innerHTML = "";
    const form = el(this.doc, "form", "ask-form");
    const input = el(this.doc, "input", "question-input") as HTMLInputElement;
    input.type = "text";
    input.placeholder = "Ask about this document";
    const button = el(this.doc, "button", "ask-submit", "Ask") as HTMLButtonElement;
    button.type = "submit";
    form.append(input, button);
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      if (input.value.trim()) void this.ask(input.value.trim());
    });

    this.panels = {
      timeline: el(this.doc, "ol", "stage-timeline"),
      samples: el(this.doc, "div", "panel samples-panel"),
      epred: el(this.doc, "div", "panel epred-panel"),
      pagesPanel: el(this.doc, "div", "panel pages-panel"),
      candidates: el(this.doc, "div", "panel candidates-panel"),
      answer: el(this.doc, "div", "panel answer-panel"),
      history: el(this.doc, "ul", "history-list"),
      error: el(this.doc, "div", "panel error-panel"),
    };
    root.append(
      form,
      this.panels.timeline,
      this.panels.error,
      this.panels.samples,
      this.panels.epred,
      this.panels.pagesPanel,
      this.panels.candidates,
      this.panels.answer,
      this.panels.history,
    );
    this.renderTimeline();
  }

  /** Submit a question and resolve once the run reaches done/error. */
  async ask(question: string): Promise<void> {
    if (this.running) return;
    this.running = true;
    this.stageLog.length = 0;
    this.trace = null;
    this.clearPanels();
    try {
      const runId = await this.api.postQuestion(this.manifest.doc_id, question);
      startRun(this.state, runId);
      this.renderTimeline();
      await new Promise<void>((resolve, reject) => {
        const sub = this.api.streamStages(runId, (event) => {
          this.stageLog.push(event);
          this.renderTimeline();
          if (event.status === "done" || event.status === "error") {
            sub.close();
            resolve();
          }
        });
        sub.done.catch(reject);
      });
      const status = await this.api.getRun(runId);
      this.trace = status.trace;
      this.renderTrace(status.trace);
      pushHistory(this.state, {
        question,
        runId,
        finalAnswer: finalAnswerOf(status.trace),
      });
      this.renderHistory();
    } catch (err) {
      this.panels.error.textContent = `run failed: ${String(err)}`;
    } finally {
      this.running = false;
    }
  }

  setZoom(zoom: number): void {
    this.state.zoom = zoom;
    if (this.trace) this.renderEvidencePages(this.trace);
  }

  setKindVisible(kind: ElementKind, visible: boolean): void {
    const has = this.state.overlayToggles.has(kind);
    if (has !== visible) toggleKind(this.state, kind);
    if (this.trace) this.renderEvidencePages(this.trace);
  }

  selectPage(index: number): void {
    this.state.selectedPage = index;
    const target = this.root.querySelector(`[data-page-container="${index}"]`);
    if (target && "scrollIntoView" in target) {
      try {
        (target as HTMLElement).scrollIntoView();
      } catch {
        // scrolling is cosmetic; some test DOMs stub it out
      }
    }
  }

  private clearPanels(): void {
    for (const panel of [
      this.panels.samples, this.panels.epred, this.panels.pagesPanel,
      this.panels.candidates, this.panels.answer, this.panels.error,
    ]) {
      panel.innerHTML = "";
    }
  }

  private renderTimeline(): void {
    const timeline = this.panels.timeline;
    timeline.innerHTML = "";
    const seen = new Map<string, string>();
    for (const event of this.stageLog) seen.set(event.stage, event.status);
    for (const stage of STAGES) {
      const status = seen.get(stage) ?? "pending";
      const item = el(this.doc, "li", `stage stage-${status}`, `${stage}: ${status}`);
      item.dataset.stage = stage;
      item.dataset.status = status;
      timeline.appendChild(item);
    }
  }

  private renderTrace(trace: Trace): void {
    if (trace.error) {
      this.panels.error.textContent =
        `stage ${trace.error.stage} failed: ${trace.error.message}`;
    }
    this.renderSamples(trace);
    this.renderEpredChips(trace);
    this.renderEvidencePages(trace);
    this.renderCandidates(trace);
    this.renderAnswer(trace);
  }

  private renderSamples(trace: Trace): void {
    const nav = trace.stages.navigation;
    const panel = this.panels.samples;
    panel.innerHTML = "";
    panel.appendChild(el(this.doc, "h3", undefined, "Sampled page sets"));
    if (!nav) {
      panel.appendChild(el(this.doc, "p", "muted", "navigation skipped"));
      return;
    }
    nav.samples.forEach((sample, j) => {
      const row = el(this.doc, "div", "sample-row");
      row.appendChild(el(this.doc, "span", "sample-label", `sample ${j + 1}`));
      for (const page of sample) {
        row.appendChild(el(this.doc, "span", "chip sample-chip", String(page)));
      }
      if (sample.length === 0) {
        row.appendChild(el(this.doc, "span", "muted", "(none)"));
      }
      panel.appendChild(row);
    });
  }

  private renderEpredChips(trace: Trace): void {
    const panel = this.panels.epred;
    panel.innerHTML = "";
    panel.appendChild(el(this.doc, "h3", undefined, "Evidence pages"));
    const pages = trace.stages.navigation?.e_pred
      ?? trace.stages.localization?.pages
      ?? [];
    for (const page of pages) {
      const chip = el(this.doc, "button", "chip epred-chip", String(page));
      chip.dataset.page = String(page);
      chip.addEventListener("click", () => this.selectPage(page));
      panel.appendChild(chip);
    }
    if (pages.length === 0) {
      panel.appendChild(el(this.doc, "p", "muted", "no evidence pages"));
    }
  }

  private renderEvidencePages(trace: Trace): void {
    const loc = trace.stages.localization;
    const panel = this.panels.pagesPanel;
    panel.innerHTML = "";
    panel.appendChild(el(this.doc, "h3", undefined, "Pages with detected elements"));
    if (!loc) return;
    for (const index of loc.pages) {
      const page = this.pages.get(index);
      if (!page) continue;
      const zoom = this.state.zoom;
      const renderedW = page.width_px * zoom;
      const renderedH = page.height_px * zoom;

      const container = el(this.doc, "div", "page-container");
      container.dataset.pageContainer = String(index);
      container.style.position = "relative";
      container.style.width = `${renderedW}px`;
      container.style.height = `${renderedH}px`;

      const img = el(this.doc, "img", "page-image") as HTMLImageElement;
      img.src = this.api.pageImageUrl(this.manifest.doc_id, index);
      img.width = renderedW;
      img.height = renderedH;
      img.alt = `page ${index}`;
      container.appendChild(img);

      const boxes: OverlayBox[] = elementsToBoxes(loc.elements[String(index)] ?? []);
      for (const gold of this.options.goldBoxes?.[index] ?? []) {
        boxes.push({ kind: "gold", bbox: gold, gold: true });
      }
      const visible = new Set<string>(this.state.overlayToggles);
      visible.add("gold");
      applyOverlays(
        container, boxes, page.width_px, page.height_px,
        renderedW, renderedH, { visibleKinds: visible },
      );

      const caption = el(this.doc, "div", "page-caption", `Page ${index}`);
      const cropChips = el(this.doc, "span", "crop-chips");
      (loc.elements[String(index)] ?? []).forEach((element, k) => {
        const chip = el(this.doc, "button", "chip crop-chip", `${element.kind} ${k + 1}`);
        chip.dataset.page = String(index);
        chip.dataset.element = String(k);
        chip.addEventListener("click", () => this.selectPage(index));
        cropChips.appendChild(chip);
      });
      caption.appendChild(cropChips);
      panel.append(container, caption);
    }
  }

  private renderCandidates(trace: Trace): void {
    const panel = this.panels.candidates;
    panel.innerHTML = "";
    panel.appendChild(el(this.doc, "h3", undefined, "Candidate answers"));
    const candidates = trace.stages.sampling?.candidates ?? [];
    const row = el(this.doc, "div", "candidate-row");
    for (const candidate of candidates) {
      const card = el(this.doc, "div", "candidate-card");
      card.appendChild(
        el(this.doc, "div", "candidate-answer", candidate.answer),
      );
      const details = el(this.doc, "details", "candidate-reasoning");
      details.appendChild(el(this.doc, "summary", undefined, "reasoning"));
      details.appendChild(el(this.doc, "p", undefined, candidate.reasoning));
      card.appendChild(details);
      row.appendChild(card);
    }
    panel.appendChild(row);
  }

  private renderAnswer(trace: Trace): void {
    const panel = this.panels.answer;
    panel.innerHTML = "";
    panel.appendChild(el(this.doc, "h3", undefined, "Final answer"));
    const answer = finalAnswerOf(trace);
    panel.appendChild(
      el(this.doc, "p", "final-answer", answer ?? "(no answer)"),
    );
    const cited = trace.stages.navigation?.e_pred
      ?? trace.stages.localization?.pages ?? [];
    if (cited.length > 0) {
      const links = el(this.doc, "span", "cited-pages");
      links.appendChild(el(this.doc, "span", "muted", "cited pages: "));
      for (const page of cited) {
        const link = el(this.doc, "button", "chip cite-chip", String(page));
        link.addEventListener("click", () => this.selectPage(page));
        links.appendChild(link);
      }
      panel.appendChild(links);
    }
  }

  private renderHistory(): void {
    const panel = this.panels.history;
    panel.innerHTML = "";
    const items = this.state.history.get(this.manifest.doc_id) ?? [];
    for (const item of items) {
      const li = el(
        this.doc, "li", "history-item",
        `${item.question} -> ${item.finalAnswer ?? "(failed)"}`,
      );
      li.dataset.runId = item.runId;
      panel.appendChild(li);
    }
  }
}

function finalAnswerOf(trace: Trace): string | null {
  if (trace.stages.adjudication) return trace.stages.adjudication.final_answer;
  const sampling = trace.stages.sampling;
  if (sampling?.mode === "direct" && sampling.candidates.length > 0) {
    return sampling.candidates[0].answer;
  }
  return null;
}
