/** Types mirroring the service's wire formats (see docs/chart-grammar.md). */

export type ChartMark = "bar" | "line" | "point" | "arc" | "area" | "table";

export interface EncodingDef {
  field: string;
  type: "quantitative" | "nominal" | "ordinal" | "temporal";
  aggregate?: string;
  scale?: { type: "log" };
}

export interface MarkAddress {
  mark_id: string;
  channel_values: Record<string, number | string>;
  row_keys: string[];
}

export interface ChartGrammar {
  mark: ChartMark;
  encoding: Record<string, EncodingDef>;
  data: { values: Record<string, unknown>[] };
  params?: { name: string; select: { type: string; encodings?: string[] } }[];
  usermeta: { insight: string; marks: MarkAddress[] };
}

export interface FigureBundle {
  figure_id: string;
  chart: ChartGrammar;
  query_text: string;
  data_csv: string;
  data_digest: string;
  meta: {
    version_id: string;
    parent_version: string | null;
    operation: string;
    artifact_id: string;
  };
}

export type PredicateAtom =
  | { kind: "membership"; column: string; values: (number | string)[] }
  | { kind: "range"; column: string; lo: number | string; hi: number | string }
  | { kind: "comparison"; column: string; op: string; value: number | string };

export interface PredicateEcho {
  atoms: PredicateAtom[];
}

export interface StreamEvent {
  kind: "action_selected" | "action_result" | "evaluation" | "figure_ready" | "error" | "done";
  payload: Record<string, unknown>;
  sequence: number;
}

export interface VersionNodeInfo {
  version_id: string;
  parent: string | null;
  created_at: string;
  figure_ids: string[];
  trigger_text: string | null;
}

export interface GestureBody {
  kind: "click" | "brush1d" | "brush2d";
  mark_ids?: string[];
  channel?: string;
  lo?: number | string;
  hi?: number | string;
  x_lo?: number;
  x_hi?: number;
  y_lo?: number;
  y_hi?: number;
}

/** Rows selected by a predicate echo, evaluated over the figure's own rows.
 * The server's predicate is authoritative; this evaluation exists so the UI
 * can highlight without another round trip. */
export function rowsMatching(echo: PredicateEcho, rows: Record<string, unknown>[]): Set<string> {
  const keys = new Set<string>();
  for (const row of rows) {
    let ok = true;
    for (const atom of echo.atoms) {
      const value = row[atom.column] as number | string;
      if (atom.kind === "membership") {
        if (!atom.values.some((v) => v === value)) ok = false;
      } else if (atom.kind === "range") {
        if (!(value >= atom.lo && value <= atom.hi)) ok = false;
      } else {
        const v = atom.value;
        const op = atom.op;
        if (op === "<" && !(value < v)) ok = false;
        else if (op === "<=" && !(value <= v)) ok = false;
        else if (op === "=" && value !== v) ok = false;
        else if (op === ">=" && !(value >= v)) ok = false;
        else if (op === ">" && !(value > v)) ok = false;
        else if (op === "!=" && value === v) ok = false;
      }
      if (!ok) break;
    }
    if (ok) keys.add(String(row["__row_key"]));
  }
  return keys;
}
