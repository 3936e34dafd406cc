import { describe, expect, it } from "vitest";

import { createSSEParser } from "../src/sse.js";

describe("SSE parser", () => {
  it("parses a complete event", () => {
    const parser = createSSEParser();
    const messages = parser.feed('event: stage\ndata: {"a": 1}\n\n');
    expect(messages).toEqual([{ event: "stage", data: '{"a": 1}' }]);
  });

  it("reassembles events split across chunks", () => {
    const parser = createSSEParser();
    expect(parser.feed("event: sta")).toEqual([]);
    expect(parser.feed("ge\ndata: hel")).toEqual([]);
    const messages = parser.feed("lo\n\n");
    expect(messages).toEqual([{ event: "stage", data: "hello" }]);
  });

  it("parses several events in one chunk", () => {
    const parser = createSSEParser();
    const messages = parser.feed(
      "event: stage\ndata: one\n\nevent: stage\ndata: two\n\n",
    );
    expect(messages.map((m) => m.data)).toEqual(["one", "two"]);
  });

  it("joins multiple data lines with newlines", () => {
    const parser = createSSEParser();
    const messages = parser.feed("data: line1\ndata: line2\n\n");
    expect(messages).toEqual([{ event: "message", data: "line1\nline2" }]);
  });

  it("ignores comments and handles CRLF", () => {
    const parser = createSSEParser();
    const messages = parser.feed(": ping\r\nevent: stage\r\ndata: x\r\n\r\n");
    expect(messages).toEqual([{ event: "stage", data: "x" }]);
  });

  it("dispatches nothing for blank lines without data", () => {
    const parser = createSSEParser();
    expect(parser.feed("\n\n\n")).toEqual([]);
  });
});
