/** Thin client over /api/v1; the only module that talks to the network. */

import { SseParser } from "./sse.js";
import { FigureBundle, GestureBody, StreamEvent, VersionNodeInfo } from "./types.js";

export class ApiClient {
  constructor(readonly base: string = "/api/v1") {}

  async createSession(backend?: string): Promise<string> {
    const response = await fetch(`${this.base}/sessions`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(backend ? { backend } : {}),
    });
    if (!response.ok) throw new Error(`create session failed: ${response.status}`);
    const body = (await response.json()) as { session_id: string };
    return body.session_id;
  }

  async getSession(sessionId: string): Promise<Record<string, unknown>> {
    const response = await fetch(`${this.base}/sessions/${sessionId}`);
    if (!response.ok) throw new Error(`session fetch failed: ${response.status}`);
    return (await response.json()) as Record<string, unknown>;
  }

  /** POST a message and surface each stream event as it arrives. */
  async postMessage(
    sessionId: string,
    body: { text?: string; interaction?: GestureBody & { figure_id: string }; target_figure?: string },
    onEvent: (event: StreamEvent) => void,
  ): Promise<number> {
    return this.streamPost(`${this.base}/sessions/${sessionId}/messages`, body, onEvent);
  }

  async postGesture(
    figureId: string,
    gesture: GestureBody,
    onEvent: (event: StreamEvent) => void,
  ): Promise<number> {
    return this.streamPost(`${this.base}/figures/${figureId}/gestures`, gesture, onEvent);
  }

  private async streamPost(
    url: string,
    body: unknown,
    onEvent: (event: StreamEvent) => void,
  ): Promise<number> {
    const response = await fetch(url, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!response.ok || !response.body) {
      const detail = await response.text();
      throw new Error(`stream failed: ${response.status} ${detail}`);
    }
    const parser = new SseParser();
    const reader = response.body.getReader();
    const decoder = new TextDecoder();
    let count = 0;
    for (;;) {
      const { done, value } = await reader.read();
      if (done) break;
      for (const event of parser.push(decoder.decode(value, { stream: true }))) {
        count += 1;
        onEvent(event);
      }
    }
    return count;
  }

  async figureBundle(figureId: string): Promise<FigureBundle> {
    const response = await fetch(`${this.base}/figures/${figureId}/bundle`);
    if (!response.ok) throw new Error(`bundle fetch failed: ${response.status}`);
    return (await response.json()) as FigureBundle;
  }

  async versions(artifactId: string): Promise<VersionNodeInfo[]> {
    const response = await fetch(`${this.base}/artifacts/${artifactId}/versions`);
    if (!response.ok) throw new Error(`versions fetch failed: ${response.status}`);
    const body = (await response.json()) as { versions: VersionNodeInfo[] };
    return body.versions;
  }
}
