/** Shapes of the service's JSON payloads the workbench consumes. */

export type ElementKind = "table" | "figure" | "chart";

export interface DocInfo {
  doc_id: string;
  page_count: number;
}

export interface ManifestElement {
  kind: ElementKind;
  bbox: [number, number, number, number];
}

export interface ManifestPage {
  index: number;
  image: string;
  width_px: number;
  height_px: number;
  ocr_text: string | null;
  elements: ManifestElement[];
}

export interface Manifest {
  doc_id: string;
  pages: ManifestPage[];
}

export interface StageEvent {
  run_id: string;
  stage: string;
  status: string;
}

export interface TraceCandidate {
  sample_index: number;
  reasoning: string;
  answer: string;
}

export interface Trace {
  run_id: string;
  question: string;
  stages: {
    navigation?: {
      mode: string;
      e_pred: number[];
      samples: number[][];
      chunks: [number, number][];
    };
    localization?: {
      mode: string;
      pages: number[];
      crop_counts: Record<string, number>;
      elements: Record<string, ManifestElement[]>;
    };
    sampling?: {
      mode: string;
      candidates: TraceCandidate[];
    };
    adjudication?: {
      meta_analysis: string;
      final_answer: string;
      short_circuited: boolean;
    };
  };
  error?: { stage: string; message: string } | null;
}

export interface RunStatus {
  run_id: string;
  status: string;
  trace: Trace;
}

export interface HistoryItem {
  question: string;
  runId: string;
  finalAnswer: string | null;
}
