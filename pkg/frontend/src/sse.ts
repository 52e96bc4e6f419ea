// Server-sent-events plumbing: a chunk-tolerant line parser plus a
// fetch-streaming subscribe loop with automatic reconnect.
//
// fetch streaming (rather than EventSource) keeps the same code path
// usable from tests and from the browser.

import { parseEventLine, type SessionEvent } from "./types.js";

/** Incremental parser for an SSE byte stream; emits `data:` payload lines. */
export class SseParser {
  private buffer = "";

  feed(chunk: string): string[] {
    this.buffer += chunk;
    const lines: string[] = [];
    let index: number;
    while ((index = this.buffer.indexOf("\n")) >= 0) {
      const line = this.buffer.slice(0, index).replace(/\r$/, "");
      this.buffer = this.buffer.slice(index + 1);
      if (line.startsWith("data: ")) {
        lines.push(line.slice("data: ".length));
      } else if (line.startsWith("data:")) {
        lines.push(line.slice("data:".length));
      }
    }
    return lines;
  }
}

export interface SubscribeHandlers {
  onEvent: (event: SessionEvent) => void;
  onStatus?: (status: "connecting" | "open" | "reconnecting" | "closed") => void;
}

export interface Subscription {
  close: () => void;
}

/**
 * Subscribe to a session's ordered event stream. On any interruption the
 * loop reconnects and replays from sequence 0; the consumer deduplicates
 * by sequence number.
 */
export function subscribe(
  baseUrl: string,
  sessionId: string,
  handlers: SubscribeHandlers,
  reconnectDelayMs = 1000,
): Subscription {
  let closed = false;
  let controller: AbortController | null = null;

  const loop = async () => {
    while (!closed) {
      controller = new AbortController();
      handlers.onStatus?.("connecting");
      try {
        const response = await fetch(`${baseUrl}/sessions/${sessionId}/events`, {
          signal: controller.signal,
          headers: { accept: "text/event-stream" },
        });
        if (!response.ok || !response.body) {
          throw new Error(`event stream failed: ${response.status}`);
        }
        handlers.onStatus?.("open");
        const reader = response.body.getReader();
        const decoder = new TextDecoder();
        const parser = new SseParser();
        for (;;) {
          const { value, done } = await reader.read();
          if (done) break;
          for (const payload of parser.feed(decoder.decode(value, { stream: true }))) {
            const event = parseEventLine(payload);
            if (event) handlers.onEvent(event);
          }
        }
      } catch {
        // fall through to reconnect
      }
      if (closed) break;
      handlers.onStatus?.("reconnecting");
      await new Promise((resolve) => setTimeout(resolve, reconnectDelayMs));
    }
    handlers.onStatus?.("closed");
  };

  void loop();
  return {
    close: () => {
      closed = true;
      controller?.abort();
    },
  };
}
