/** DOM wiring for the single-page client. Everything stateful lives in
 * ViewState; everything visual re-renders from it. One in-flight streamed
 * request per session, matching the server's 409 rule. */

import { ApiClient } from "./api.js";
import { buildScene, hitTest, marksInRect, Scene, toSvg } from "./renderer.js";
import { brushToBounds } from "./scales.js";
import { historyLayout, ViewState } from "./state.js";
import { GestureBody, StreamEvent } from "./types.js";

const state = new ViewState();
const api = new ApiClient();
let inFlight = false;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

async function ensureSession(): Promise<string> {
  if (!state.sessionId) {
    state.sessionId = await api.createSession();
    el<HTMLElement>("session-label").textContent = state.sessionId;
  }
  return state.sessionId;
}

function renderProgress(): void {
  const list = el<HTMLUListElement>("progress");
  list.replaceChildren(
    ...state.log.events.map((event, i) => {
      const item = document.createElement("li");
      item.dataset.sequence = String(event.sequence);
      item.textContent = state.log.lines()[i];
      return item;
    }),
  );
}

function onStreamEvent(event: StreamEvent): void {
  state.log.append(event);
  renderProgress();
}

async function refreshFigures(figureIds: string[]): Promise<void> {
  for (const figureId of figureIds) {
    const bundle = await api.figureBundle(figureId);
    state.refreshFigure(bundle);
  }
  renderFigures();
  await refreshHistory();
}

function renderFigures(): void {
  const host = el<HTMLDivElement>("figures");
  host.replaceChildren();
  for (const open of [...state.figures.values()].sort((a, b) => a.position - b.position)) {
    const panel = document.createElement("section");
    panel.className = "figure-panel";
    panel.dataset.figureId = open.figureId;

    const title = document.createElement("header");
    const op = open.bundle.meta.operation;
    title.textContent = `${open.figureId} · ${op}`;
    if (op === "extend" || op === "coordinate_update") {
      const badge = document.createElement("span");
      badge.className = "badge";
      badge.textContent = "linked";
      title.appendChild(badge);
    }
    panel.appendChild(title);

    const scene = buildScene(open.bundle.chart);
    const mount = document.createElement("div");
    mount.className = "chart";
    mount.innerHTML = toSvg(scene, open.highlighted);
    panel.appendChild(mount);
    wireGestures(mount, scene, open.figureId);

    const caption = document.createElement("p");
    caption.className = "insight";
    caption.textContent = open.bundle.chart.usermeta.insight;
    panel.appendChild(caption);

    const status = document.createElement("p");
    status.className = "selection";
    status.dataset.role = "selection";
    status.textContent = open.preview
      ? `preview: ${open.preview}`
      : open.echo
        ? `selected ${open.highlighted.size} rows`
        : "";
    panel.appendChild(status);

    const followup = document.createElement("input");
    followup.placeholder = "follow up on this selection…";
    followup.addEventListener("keydown", (keyEvent) => {
      if (keyEvent.key === "Enter" && followup.value.trim()) {
        void sendFollowup(open.figureId, followup.value.trim());
        followup.value = "";
      }
    });
    panel.appendChild(followup);
    host.appendChild(panel);
  }
}

interface DragState {
  x0: number;
  y0: number;
}

function wireGestures(mount: HTMLDivElement, scene: Scene, figureId: string): void {
  let drag: DragState | null = null;
  const svg = mount.querySelector("svg");
  if (!svg) return;

  svg.addEventListener("pointerdown", (pointer) => {
    drag = { x0: pointer.offsetX, y0: pointer.offsetY };
  });

  svg.addEventListener("pointermove", (pointer) => {
    if (!drag || !scene.xScale) return;
    const [lo, hi] = brushToBounds(scene.xScale, drag.x0, pointer.offsetX);
    state.setPreview(figureId, `x ∈ [${fmt(lo)}, ${fmt(hi)}]`);
    const status = mount.parentElement?.querySelector("[data-role=selection]");
    if (status) status.textContent = `preview: x ∈ [${fmt(lo)}, ${fmt(hi)}]`;
  });

  svg.addEventListener("pointerup", (pointer) => {
    if (!drag) return;
    const { x0, y0 } = drag;
    drag = null;
    const moved = Math.abs(pointer.offsetX - x0) > 4 || Math.abs(pointer.offsetY - y0) > 4;
    if (!moved) {
      const mark = hitTest(scene, pointer.offsetX, pointer.offsetY);
      if (mark) void sendGesture(figureId, { kind: "click", mark_ids: [mark.markId] });
      return;
    }
    const gesture = brushGesture(scene, x0, y0, pointer.offsetX, pointer.offsetY);
    if (gesture) void sendGesture(figureId, gesture);
  });
}

/** Local geometry -> gesture body. Vertical drags brush y, horizontal drags
 * brush x, diagonal drags brush both; values come from scale inversion but
 * the selected rows come from the server's echo. */
export function brushGesture(
  scene: Scene,
  x0: number,
  y0: number,
  x1: number,
  y1: number,
): GestureBody | null {
  const dx = Math.abs(x1 - x0);
  const dy = Math.abs(y1 - y0);
  if (scene.kind === "table") {
    if (!scene.marks.length) return null;
    const inside = marksInRect(scene, scene.plot.x, Math.min(y0, y1), scene.plot.x + scene.plot.width, Math.max(y0, y1));
    const values = inside.map((m) => m.channelValues["row_label"]).filter((v) => typeof v === "number") as number[];
    if (!values.length) return null;
    return { kind: "brush1d", channel: "row_label", lo: Math.min(...values), hi: Math.max(...values) };
  }
  if (!scene.xScale || !scene.yScale) return null;
  if (dx > 4 && dy > 4) {
    const [xLo, xHi] = brushToBounds(scene.xScale, x0, x1);
    const [yLo, yHi] = brushToBounds(scene.yScale, y0, y1);
    if (typeof xLo !== "number" || typeof yLo !== "number") return null;
    return { kind: "brush2d", x_lo: xLo, x_hi: xHi as number, y_lo: yLo, y_hi: yHi as number };
  }
  if (dx >= dy) {
    const [lo, hi] = brushToBounds(scene.xScale, x0, x1);
    if (typeof lo !== "number") return null; // nominal axis: click instead
    return { kind: "brush1d", channel: "x", lo, hi: hi as number };
  }
  const [lo, hi] = brushToBounds(scene.yScale, y0, y1);
  if (typeof lo !== "number") return null;
  return { kind: "brush1d", channel: "y", lo, hi: hi as number };
}

function fmt(v: number | string): string {
  return typeof v === "number" ? v.toPrecision(4).replace(/\.?0+$/, "") : String(v);
}

async function sendGesture(figureId: string, gesture: GestureBody): Promise<void> {
  state.startStream();
  const updated: string[] = [];
  await api.postGesture(figureId, gesture, (event) => {
    onStreamEvent(event);
    if (event.kind === "done") {
      const echo = event.payload["predicate"] as { atoms: [] } | undefined;
      if (echo) state.applyEcho(figureId, echo);
      updated.push(...((event.payload["updated_figures"] as string[]) ?? []));
    }
  });
  renderFigures();
  if (updated.length) await refreshFigures(updated);
}

async function sendFollowup(figureId: string, text: string): Promise<void> {
  const open = state.figures.get(figureId);
  if (!open?.echo) {
    state.setPreview(figureId, "select marks first, then follow up");
    renderFigures();
    return;
  }
  // replay the echoed selection as the gesture context for the follow-up
  const sessionId = await ensureSession();
  const atoms = open.echo.atoms;
  const body: { text: string; interaction?: GestureBody & { figure_id: string } } = { text };
  const scene = buildScene(open.bundle.chart);
  const markIds = scene.marks
    .filter((m) => m.rowKeys.some((k) => open.highlighted.has(k)))
    .map((m) => m.markId);
  if (markIds.length && atoms.length) {
    body.interaction = { figure_id: figureId, kind: "click", mark_ids: markIds };
  }
  await runMessage(sessionId, body);
}

async function runMessage(
  sessionId: string,
  body: { text?: string; interaction?: GestureBody & { figure_id: string }; target_figure?: string },
): Promise<void> {
  if (inFlight) {
    el<HTMLElement>("notice").textContent = "a request is already streaming; queued input dropped";
    return;
  }
  inFlight = true;
  el<HTMLElement>("notice").textContent = "";
  state.startStream();
  try {
    const figures: string[] = [];
    await api.postMessage(sessionId, body, (event) => {
      onStreamEvent(event);
      if (event.kind === "figure_ready") figures.push(String(event.payload["figure_id"]));
      if (event.kind === "done") {
        const listed = event.payload["figure_ids"] as string[] | undefined;
        if (listed) figures.push(...listed.filter((f) => !figures.includes(f)));
        const subs = event.payload["sub_questions"] as string[] | undefined;
        if (subs) el<HTMLElement>("notice").textContent = `clarify: ${subs.join(" · ")}`;
      }
    });
    if (figures.length) await refreshFigures([...new Set(figures)]);
  } catch (error) {
    el<HTMLElement>("notice").textContent = `request failed: ${String(error)} (retry)`;
  } finally {
    inFlight = false;
  }
}

async function refreshHistory(): Promise<void> {
  const first = [...state.figures.values()][0];
  if (!first) return;
  const artifactId = first.bundle.meta.artifact_id;
  state.setHistory(await api.versions(artifactId));
  const host = el<HTMLDivElement>("history");
  host.replaceChildren();
  for (const node of historyLayout(state.historyNodes)) {
    const chip = document.createElement("button");
    chip.className = node.isBranch ? "version branch" : "version";
    chip.style.marginLeft = `${node.depth * 18}px`;
    chip.textContent = `${node.isBranch ? "⑂ " : ""}${node.label}`;
    chip.title = node.versionId;
    host.appendChild(chip);
  }
}

export function main(): void {
  const input = el<HTMLInputElement>("chat-input");
  input.addEventListener("keydown", (keyEvent) => {
    if (keyEvent.key === "Enter" && input.value.trim()) {
      const text = input.value.trim();
      input.value = "";
      void ensureSession().then((sid) => runMessage(sid, { text }));
    }
  });
}

if (typeof document !== "undefined" && document.getElementById("chat-input")) {
  main();
}
