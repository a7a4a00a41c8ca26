// Live-frame plumbing: a Server-Sent-Events reader built on fetch streaming
// (works in browsers and Node alike) and an ordering buffer that tolerates
// dropped frames but never renders out of order.

import type { LiveFrame } from "./types.js";

/** Incremental parser for an SSE byte stream; yields the data payloads. */
export class SseParser {
  private buffer = "";

  push(chunk: string): string[] {
    this.buffer += chunk;
    const events: string[] = [];
    let index: number;
    while ((index = this.buffer.indexOf("\n\n")) >= 0) {
      const block = this.buffer.slice(0, index);
      this.buffer = this.buffer.slice(index + 2);
      for (const line of block.split("\n")) {
        if (line.startsWith("data: ")) events.push(line.slice("data: ".length));
      }
    }
    return events;
  }
}

/**
 * Keeps arrival order honest: frames whose sequence number does not advance
 * are discarded (the server already drops overflow for slow consumers, so a
 * gap is fine; a rewind is not).
 */
export class FrameFeed {
  lastSeq = 0;
  accepted = 0;
  discarded = 0;

  constructor(private readonly onFrame: (frame: LiveFrame) => void) {}

  push(frame: LiveFrame): boolean {
    if (!(frame.seq > this.lastSeq)) {
      this.discarded += 1;
      return false;
    }
    this.lastSeq = frame.seq;
    this.accepted += 1;
    this.onFrame(frame);
    return true;
  }
}

export interface LiveOptions {
  retryDelayMs?: number;
  onState?: (state: "connecting" | "open" | "reconnecting" | "closed") => void;
}

/** Subscribe to /v1/live; reconnects with a fixed delay until stop() is called. */
export function connectLive(
  baseUrl: string,
  onFrame: (frame: LiveFrame) => void,
  options: LiveOptions = {},
): { stop: () => void; feed: FrameFeed } {
  const feed = new FrameFeed(onFrame);
  const retry = options.retryDelayMs ?? 1000;
  let stopped = false;
  let controller: AbortController | null = null;

  const loop = async () => {
    while (!stopped) {
      options.onState?.(feed.accepted ? "reconnecting" : "connecting");
      controller = new AbortController();
      try {
        const res = await fetch(baseUrl.replace(/\/$/, "") + "/v1/live", {
          signal: controller.signal,
        });
        if (!res.ok || !res.body) throw new Error(`status ${res.status}`);
        options.onState?.("open");
        const reader = res.body.getReader();
        const decoder = new TextDecoder();
        const parser = new SseParser();
        for (;;) {
          const { done, value } = await reader.read();
          if (done) break;
          for (const payload of parser.push(decoder.decode(value, { stream: true }))) {
            feed.push(JSON.parse(payload) as LiveFrame);
          }
        }
      } catch {
        // fall through to the retry path
      }
      if (stopped) break;
      await new Promise((resolve) => setTimeout(resolve, retry));
    }
    options.onState?.("closed");
  };
  void loop();

  return {
    stop: () => {
      stopped = true;
      controller?.abort();
    },
    feed,
  };
}
