import { describe, expect, it } from "vitest";

import { EventLog, SseParser } from "../src/sse.js";
import { historyLayout, ViewState } from "../src/state.js";
import { FigureBundle, rowsMatching, StreamEvent } from "../src/types.js";

function frame(kind: string, sequence: number, payload: object = {}): string {
  return `id: ${sequence}\nevent: ${kind}\ndata: ${JSON.stringify({ kind, payload, sequence })}\n\n`;
}

describe("SseParser", () => {
  it("reassembles events across arbitrary chunk boundaries", () => {
    const text = frame("action_selected", 0) + frame("evaluation", 1, { score: 1 }) + frame("done", 2);
    for (const size of [1, 3, 7, 1000]) {
      const parser = new SseParser();
      const events: StreamEvent[] = [];
      for (let i = 0; i < text.length; i += size) {
        events.push(...parser.push(text.slice(i, i + size)));
      }
      expect(events.map((e) => e.kind)).toEqual(["action_selected", "evaluation", "done"]);
      expect(events.map((e) => e.sequence)).toEqual([0, 1, 2]);
    }
  });
});

describe("EventLog", () => {
  const make = (kind: StreamEvent["kind"], sequence: number): StreamEvent => ({
    kind,
    payload: {},
    sequence,
  });

  it("keeps events in monotone sequence order for the DOM list", () => {
    const log = new EventLog();
    log.append(make("action_selected", 0));
    log.append(make("action_result", 1));
    log.append(make("done", 2));
    expect(log.events.map((e) => e.sequence)).toEqual([0, 1, 2]);
    expect(log.finished).toBe(true);
    expect(log.lines()).toHaveLength(3);
  });

  it("rejects gaps and out-of-order arrivals", () => {
    const log = new EventLog();
    log.append(make("action_selected", 0));
    expect(() => log.append(make("action_result", 2))).toThrow(/out-of-order/);
  });

  it("rejects a second terminal event", () => {
    const log = new EventLog();
    log.append(make("done", 0));
    expect(() => log.append(make("error", 1))).toThrow(/after terminal/);
  });
});

function bundle(): FigureBundle {
  return {
    figure_id: "a1/f1",
    chart: {
      mark: "line",
      encoding: {
        x: { field: "month", type: "quantitative" },
        y: { field: "temp", type: "quantitative" },
      },
      data: {
        values: [
          { month: 5, temp: 60, __row_key: "t:5" },
          { month: 6, temp: 62, __row_key: "t:6" },
          { month: 7, temp: 64, __row_key: "t:7" },
        ],
      },
      usermeta: { insight: "", marks: [] },
    },
    query_text: "SELECT * FROM temps",
    data_csv: "",
    data_digest: "",
    meta: { version_id: "v", parent_version: null, operation: "generate", artifact_id: "a1" },
  };
}

describe("ViewState selections", () => {
  it("highlights come only from the server echo", () => {
    const state = new ViewState();
    state.openFigure(bundle());
    const highlighted = state.applyEcho("a1/f1", {
      atoms: [{ kind: "range", column: "month", lo: 6, hi: 7 }],
    });
    expect([...highlighted].sort()).toEqual(["t:6", "t:7"]);
    expect(state.figures.get("a1/f1")!.preview).toBeNull();
  });

  it("refresh re-evaluates the stored echo over new data", () => {
    const state = new ViewState();
    state.openFigure(bundle());
    state.applyEcho("a1/f1", { atoms: [{ kind: "membership", column: "month", values: [5] }] });
    const next = bundle();
    next.chart.data.values = [
      { month: 5, temp: 61, __row_key: "t:50" },
      { month: 8, temp: 66, __row_key: "t:8" },
    ];
    state.refreshFigure(next);
    expect([...state.figures.get("a1/f1")!.highlighted]).toEqual(["t:50"]);
  });
});

describe("rowsMatching", () => {
  const rows = [
    { month: 6, state: "FL", __row_key: "a" },
    { month: 7, state: "GA", __row_key: "b" },
    { month: 9, state: "FL", __row_key: "c" },
  ];

  it("conjunction of atoms", () => {
    const keys = rowsMatching(
      { atoms: [
        { kind: "range", column: "month", lo: 6, hi: 8 },
        { kind: "membership", column: "state", values: ["FL"] },
      ] },
      rows,
    );
    expect([...keys]).toEqual(["a"]);
  });

  it("comparison atoms", () => {
    const keys = rowsMatching({ atoms: [{ kind: "comparison", column: "month", op: ">", value: 6 }] }, rows);
    expect([...keys].sort()).toEqual(["b", "c"]);
  });
});

describe("historyLayout", () => {
  it("linear history renders a chain", () => {
    const layout = historyLayout([
      { version_id: "v1", parent: null, created_at: "", figure_ids: [], trigger_text: "first" },
      { version_id: "v2", parent: "v1", created_at: "", figure_ids: [], trigger_text: "second" },
    ]);
    expect(layout.map((n) => n.depth)).toEqual([0, 1]);
    expect(layout.every((n) => !n.isBranch)).toBe(true);
  });

  it("branching marks fork glyphs and lanes", () => {
    const layout = historyLayout([
      { version_id: "v1", parent: null, created_at: "", figure_ids: [], trigger_text: null },
      { version_id: "v2", parent: "v1", created_at: "", figure_ids: [], trigger_text: null },
      { version_id: "v3", parent: "v1", created_at: "", figure_ids: [], trigger_text: null },
    ]);
    const forks = layout.filter((n) => n.isBranch);
    expect(forks).toHaveLength(2);
    expect(new Set(forks.map((n) => n.lane)).size).toBe(2);
  });
});
