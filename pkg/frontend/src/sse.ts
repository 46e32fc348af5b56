/** Incremental SSE parsing plus the ordered event log the progress list
 * renders from. Sequence numbers must be dense and increasing; exactly one
 * terminal done/error event per stream. */

import { StreamEvent } from "./types.js";

export class SseParser {
  private buffer = "";

  /** Feed a text chunk; returns any completed events. */
  push(chunk: string): StreamEvent[] {
    this.buffer += chunk;
    const events: StreamEvent[] = [];
    let boundary = this.buffer.indexOf("\n\n");
    while (boundary !== -1) {
      const block = this.buffer.slice(0, boundary);
      this.buffer = this.buffer.slice(boundary + 2);
      const data = block
        .split("\n")
        .find((line) => line.startsWith("data: "));
      if (data) {
        events.push(JSON.parse(data.slice(6)) as StreamEvent);
      }
      boundary = this.buffer.indexOf("\n\n");
    }
    return events;
  }
}

export class EventLog {
  readonly events: StreamEvent[] = [];
  private nextSequence = 0;
  private terminalSeen = false;

  /** Append in arrival order, enforcing the stream contract. */
  append(event: StreamEvent): void {
    if (this.terminalSeen) {
      throw new Error(`event after terminal: ${event.kind}`);
    }
    if (event.sequence !== this.nextSequence) {
      throw new Error(
        `out-of-order event: expected sequence ${this.nextSequence}, got ${event.sequence}`,
      );
    }
    this.nextSequence += 1;
    if (event.kind === "done" || event.kind === "error") {
      this.terminalSeen = true;
    }
    this.events.push(event);
  }

  get finished(): boolean {
    return this.terminalSeen;
  }

  get terminal(): StreamEvent | null {
    return this.terminalSeen ? this.events[this.events.length - 1] : null;
  }

  /** Render-ready lines, in the order they must appear in the DOM list. */
  lines(): string[] {
    return this.events.map((e) => {
      switch (e.kind) {
        case "action_selected": {
          const action = e.payload["action"] as { kind?: string } | undefined;
          return `→ ${action?.kind ?? "action"}`;
        }
        case "action_result":
          return e.payload["status"] === "ok" ? "✓ executed" : `✗ ${e.payload["error"] ?? "failed"}`;
        case "evaluation":
          return `score ${e.payload["score"]}`;
        case "figure_ready":
          return `figure ${e.payload["figure_id"]}`;
        case "error":
          return `error: ${e.payload["message"]}`;
        case "done":
          return "done";
      }
    });
  }
}
