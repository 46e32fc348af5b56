/** View state: open figures, selections, stream status, history tree.
 *
 * Selections always come from a server predicate echo — the client never
 * invents predicates; local geometry only produces previews until the echo
 * arrives. */

import { EventLog } from "./sse.js";
import { FigureBundle, PredicateEcho, rowsMatching, VersionNodeInfo } from "./types.js";

export interface OpenFigure {
  figureId: string;
  bundle: FigureBundle;
  /** row keys highlighted per the last server echo; empty = no selection */
  highlighted: Set<string>;
  echo: PredicateEcho | null;
  /** local preview bounds while a brush is in progress (not authoritative) */
  preview: string | null;
  position: number;
}

export class ViewState {
  sessionId: string | null = null;
  figures = new Map<string, OpenFigure>();
  log = new EventLog();
  historyNodes: VersionNodeInfo[] = [];

  startStream(): void {
    this.log = new EventLog();
  }

  openFigure(bundle: FigureBundle): OpenFigure {
    const open: OpenFigure = {
      figureId: bundle.figure_id,
      bundle,
      highlighted: new Set(),
      echo: null,
      preview: null,
      position: this.figures.size,
    };
    this.figures.set(bundle.figure_id, open);
    return open;
  }

  refreshFigure(bundle: FigureBundle): void {
    const open = this.figures.get(bundle.figure_id);
    if (!open) {
      this.openFigure(bundle);
      return;
    }
    open.bundle = bundle;
    if (open.echo) {
      open.highlighted = rowsMatching(open.echo, bundle.chart.data.values);
    }
  }

  /** The one legal way to set a selection: the server's predicate echo. */
  applyEcho(figureId: string, echo: PredicateEcho): Set<string> {
    const open = this.figures.get(figureId);
    if (!open) throw new Error(`unknown figure ${figureId}`);
    open.echo = echo;
    open.preview = null;
    open.highlighted = rowsMatching(echo, open.bundle.chart.data.values);
    return open.highlighted;
  }

  setPreview(figureId: string, text: string | null): void {
    const open = this.figures.get(figureId);
    if (open) open.preview = text;
  }

  setHistory(nodes: VersionNodeInfo[]): void {
    this.historyNodes = nodes;
  }
}

export interface HistoryNodeView {
  versionId: string;
  parent: string | null;
  depth: number;
  lane: number;
  isBranch: boolean;
  label: string;
}

/** Lay the version DAG out as depth/lane coordinates for the history view. */
export function historyLayout(nodes: VersionNodeInfo[]): HistoryNodeView[] {
  const byId = new Map(nodes.map((n) => [n.version_id, n]));
  const depth = new Map<string, number>();
  const childCount = new Map<string, number>();
  for (const node of nodes) {
    if (node.parent) {
      childCount.set(node.parent, (childCount.get(node.parent) ?? 0) + 1);
    }
  }
  const resolve = (id: string): number => {
    if (depth.has(id)) return depth.get(id)!;
    const node = byId.get(id);
    const d = node?.parent ? resolve(node.parent) + 1 : 0;
    depth.set(id, d);
    return d;
  };
  const laneAt = new Map<number, number>();
  const out: HistoryNodeView[] = [];
  for (const node of nodes) {
    const d = resolve(node.version_id);
    const lane = laneAt.get(d) ?? 0;
    laneAt.set(d, lane + 1);
    out.push({
      versionId: node.version_id,
      parent: node.parent,
      depth: d,
      lane,
      isBranch: node.parent !== null && (childCount.get(node.parent) ?? 0) > 1,
      label: node.trigger_text ?? node.version_id.slice(0, 10),
    });
  }
  return out;
}
