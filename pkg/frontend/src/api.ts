/** Typed client for the document QA service; the UI talks to nothing else. */

import type { DocInfo, Manifest, RunStatus, StageEvent } from "./types.js";
import { streamEvents, type SSESubscription } from "./sse.js";

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
  }
}

async function getJson<T>(url: string, fetchImpl: typeof fetch): Promise<T> {
  const resp = await fetchImpl(url);
  if (!resp.ok) throw new ApiError(resp.status, `${url} -> ${resp.status}`);
  return (await resp.json()) as T;
}

export class ApiClient {
  constructor(
    readonly base: string = "",
    private readonly fetchImpl: typeof fetch = fetch,
  ) {}

  async listDocuments(): Promise<DocInfo[]> {
    const body = await getJson<{ documents: DocInfo[] }>(
      `${this.base}/documents`, this.fetchImpl,
    );
    return body.documents;
  }

  getManifest(docId: string): Promise<Manifest> {
    return getJson<Manifest>(
      `${this.base}/documents/${encodeURIComponent(docId)}`, this.fetchImpl,
    );
  }

  pageImageUrl(docId: string, page: number): string {
    return `${this.base}/documents/${encodeURIComponent(docId)}/pages/${page}/image`;
  }

  cropUrl(docId: string, page: number, k: number): string {
    return `${this.base}/documents/${encodeURIComponent(docId)}/pages/${page}/elements/${k}/crop`;
  }

  async postQuestion(
    docId: string,
    question: string,
    config?: Record<string, unknown>,
  ): Promise<string> {
    const resp = await this.fetchImpl(`${this.base}/questions`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ doc_id: docId, question, config }),
    });
    if (!resp.ok) throw new ApiError(resp.status, `question rejected: ${resp.status}`);
    const body = (await resp.json()) as { run_id: string };
    return body.run_id;
  }

  getRun(runId: string): Promise<RunStatus> {
    return getJson<RunStatus>(
      `${this.base}/runs/${encodeURIComponent(runId)}`, this.fetchImpl,
    );
  }

  streamStages(runId: string, onEvent: (event: StageEvent) => void): SSESubscription {
    return streamEvents(
      `${this.base}/runs/${encodeURIComponent(runId)}/events`,
      (msg) => {
        if (msg.event !== "stage") return;
        try {
          onEvent(JSON.parse(msg.data) as StageEvent);
        } catch {
          // tolerate malformed frames; the status poll is the fallback
        }
      },
      this.fetchImpl,
    );
  }
}
