/** Client-side view state: selection, overlay toggles, question history. */

import type { ElementKind, HistoryItem } from "./types.js";

export const ALL_KINDS: ElementKind[] = ["table", "figure", "chart"];

export interface ViewState {
  docId: string | null;
  runId: string | null;
  stageFocus: string | null;
  selectedPage: number | null;
  zoom: number;
  overlayToggles: Set<ElementKind>;
  /** question history, kept per document on the client only */
  history: Map<string, HistoryItem[]>;
}

export function initialState(): ViewState {
  return {
    docId: null,
    runId: null,
    stageFocus: null,
    selectedPage: null,
    zoom: 1,
    overlayToggles: new Set(ALL_KINDS),
    history: new Map(),
  };
}

export function selectDocument(state: ViewState, docId: string): void {
  if (state.docId !== docId) {
    state.docId = docId;
    state.runId = null;
    state.stageFocus = null;
    state.selectedPage = null;
  }
}

export function startRun(state: ViewState, runId: string): void {
  state.runId = runId;
  state.stageFocus = null;
}

export function toggleKind(state: ViewState, kind: ElementKind): boolean {
  if (state.overlayToggles.has(kind)) {
    state.overlayToggles.delete(kind);
    return false;
  }
  state.overlayToggles.add(kind);
  return true;
}

export function pushHistory(state: ViewState, item: HistoryItem): void {
  if (state.docId === null) return;
  const list = state.history.get(state.docId) ?? [];
  list.push(item);
  state.history.set(state.docId, list);
}

export function historyFor(state: ViewState, docId: string): HistoryItem[] {
  return state.history.get(docId) ?? [];
}
