/** Minimal server-sent-events client over fetch streaming.
 *
 * Works in browsers and under node-based tests alike, unlike the
 * EventSource global. Only the subset the service emits is handled:
 * `event:` and `data:` fields, blank-line dispatch, `:` comments.
 */

export interface SSEMessage {
  event: string;
  data: string;
}

/** Incremental line-oriented parser; feed() returns completed messages. */
export function createSSEParser(): { feed(chunk: string): SSEMessage[] } {
  let buffer = "";
  let eventName = "message";
  let dataLines: string[] = [];

  function dispatchInto(out: SSEMessage[]): void {
    if (dataLines.length > 0) {
      out.push({ event: eventName, data: dataLines.join("\n") });
    }
    eventName = "message";
    dataLines = [];
  }

  return {
    feed(chunk: string): SSEMessage[] {
      buffer += chunk;
      const out: SSEMessage[] = [];
      for (;;) {
        const nl = buffer.indexOf("\n");
        if (nl === -1) break;
        let line = buffer.slice(0, nl);
        buffer = buffer.slice(nl + 1);
        if (line.endsWith("\r")) line = line.slice(0, -1);
        if (line === "") {
          dispatchInto(out);
        } else if (line.startsWith(":")) {
          continue;
        } else if (line.startsWith("event:")) {
          eventName = line.slice("event:".length).trim();
        } else if (line.startsWith("data:")) {
          dataLines.push(line.slice("data:".length).replace(/^ /, ""));
        }
      }
      return out;
    },
  };
}

export interface SSESubscription {
  close(): void;
  done: Promise<void>;
}

export function streamEvents(
  url: string,
  onMessage: (msg: SSEMessage) => void,
  fetchImpl: typeof fetch = fetch,
): SSESubscription {
  const controller = new AbortController();
  const done = (async () => {
    const resp = await fetchImpl(url, {
      signal: controller.signal,
      headers: { Accept: "text/event-stream" },
    });
    if (!resp.ok || !resp.body) {
      throw new Error(`event stream failed: ${resp.status}`);
    }
    const reader = resp.body.getReader();
    const decoder = new TextDecoder();
    const parser = createSSEParser();
    for (;;) {
      const { done: finished, value } = await reader.read();
      if (finished) break;
      for (const msg of parser.feed(decoder.decode(value, { stream: true }))) {
        onMessage(msg);
      }
    }
  })().catch((err) => {
    if (!controller.signal.aborted) throw err;
  });
  return {
    close: () => controller.abort(),
    done,
  };
}
